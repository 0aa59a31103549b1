//! Model states of the antiferromagnetic Ising ring and related families.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::SpinState;

const UP: [Complex64; 2] = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
const DOWN: [Complex64; 2] = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelFamily {
    /// `|↑↓↑…↓⟩`
    NeelPlus,
    /// `|↓↑↓…↑⟩`
    NeelMinus,
    /// `(|Ψ₊⟩ + |Ψ₋⟩)/√2`
    Cat,
    ProductZ,
    ProductX,
    /// Singlet on sites 0 and 1, every other site up.
    SingletPairProduct,
    RandomProduct,
    RandomState,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 8] = [
        Self::NeelPlus,
        Self::NeelMinus,
        Self::Cat,
        Self::ProductZ,
        Self::ProductX,
        Self::SingletPairProduct,
        Self::RandomProduct,
        Self::RandomState,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NeelPlus => "NEEL_PLUS",
            Self::NeelMinus => "NEEL_MINUS",
            Self::Cat => "CAT",
            Self::ProductZ => "PRODUCT_Z",
            Self::ProductX => "PRODUCT_X",
            Self::SingletPairProduct => "SINGLET_PAIR_PRODUCT",
            Self::RandomProduct => "RANDOM_PRODUCT",
            Self::RandomState => "RANDOM_STATE",
        }
    }

    pub fn needs_even_sites(&self) -> bool {
        matches!(self, Self::NeelPlus | Self::NeelMinus | Self::Cat)
    }

    pub fn is_product(&self) -> bool {
        matches!(
            self,
            Self::NeelPlus | Self::NeelMinus | Self::ProductZ | Self::ProductX | Self::RandomProduct
        )
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model family '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub n_sites: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, n_sites: usize) -> Self {
        Self {
            family,
            n_sites,
            seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 || self.n_sites > crate::state::MAX_SITES {
            return Err(Error::InvalidSize(self.n_sites));
        }
        if self.family.needs_even_sites() && self.n_sites % 2 != 0 {
            return Err(Error::OddSites(self.family.as_str()));
        }
        if self.family == ModelFamily::SingletPairProduct && self.n_sites < 2 {
            return Err(Error::InvalidArgument(
                "SINGLET_PAIR_PRODUCT needs at least 2 sites".into(),
            ));
        }
        Ok(())
    }
}

fn neel_index(n: usize, plus: bool) -> usize {
    // |Ψ₊⟩ has the odd sites down
    let odd: usize = (0..n).filter(|x| x % 2 == 1).map(|x| 1 << x).sum();
    if plus {
        odd
    } else {
        odd ^ ((1 << n) - 1)
    }
}

pub fn build_state(spec: &ModelSpec) -> Result<SpinState> {
    spec.validate()?;
    let n = spec.n_sites;
    let seed = spec.seed.unwrap_or(0);
    match spec.family {
        ModelFamily::NeelPlus => SpinState::basis(n, neel_index(n, true)),
        ModelFamily::NeelMinus => SpinState::basis(n, neel_index(n, false)),
        ModelFamily::Cat => {
            let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
            amps[neel_index(n, true)] = h;
            amps[neel_index(n, false)] = h;
            SpinState::from_unnormalized(n, amps)
        }
        ModelFamily::ProductZ => SpinState::basis(n, 0),
        ModelFamily::ProductX => {
            let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            SpinState::product(&vec![[h, h]; n])
        }
        ModelFamily::SingletPairProduct => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
            // (|↑↓⟩ − |↓↑⟩)/√2 on sites (0, 1)
            amps[0b10] = Complex64::new(h, 0.0);
            amps[0b01] = Complex64::new(-h, 0.0);
            SpinState::from_unnormalized(n, amps)
        }
        ModelFamily::RandomProduct => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sites: Vec<[Complex64; 2]> = (0..n)
                .map(|_| {
                    let cos_t: f64 = 1.0 - 2.0 * rng.random::<f64>();
                    let phi: f64 = 2.0 * PI * rng.random::<f64>();
                    spinor(cos_t.clamp(-1.0, 1.0).acos(), phi)
                })
                .collect();
            SpinState::product(&sites)
        }
        ModelFamily::RandomState => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let amps = (0..1usize << n)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im)
                })
                .collect();
            SpinState::from_unnormalized(n, amps)
        }
    }
}

/// Spin-1/2 coherent state pointing along `(θ, φ)`.
pub fn spinor(theta: f64, phi: f64) -> [Complex64; 2] {
    [
        Complex64::new((theta / 2.0).cos(), 0.0),
        Complex64::from_polar((theta / 2.0).sin(), phi),
    ]
}

pub fn up() -> [Complex64; 2] {
    UP
}

pub fn down() -> [Complex64; 2] {
    DOWN
}

/// `H = J Σ_x σ_z(x) σ_z(x+1)` on a periodic ring, as its diagonal.
pub fn ising_afm_hamiltonian(n_sites: usize, j: f64) -> Result<Vec<f64>> {
    if n_sites < 2 || n_sites > crate::state::MAX_SITES {
        return Err(Error::InvalidSize(n_sites));
    }
    if !(j > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "antiferromagnetic coupling must be positive, got {j}"
        )));
    }
    let n = n_sites;
    Ok((0..1usize << n)
        .map(|i| {
            (0..n)
                .map(|x| {
                    let a = (i >> x) & 1;
                    let b = (i >> ((x + 1) % n)) & 1;
                    if a == b {
                        j
                    } else {
                        -j
                    }
                })
                .sum()
        })
        .collect())
}
