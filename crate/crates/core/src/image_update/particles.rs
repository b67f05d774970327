use rand::Rng;

/// Weighted joint-angle samples, `count x dim`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    dim: usize,
    states: Vec<f64>,
    log_weights: Vec<f64>,
    pub rng_seed: u64,
}

impl ParticleSet {
    /// `count` copies of `state` with uniform weights.
    pub fn replicate(state: &[f64], count: usize, rng_seed: u64) -> Self {
        let mut states = Vec::with_capacity(state.len() * count);
        for _ in 0..count {
            states.extend_from_slice(state);
        }
        Self {
            dim: state.len(),
            states,
            log_weights: vec![-(count as f64).ln(); count],
            rng_seed,
        }
    }

    /// Builds a set from explicit rows and (unnormalized) log-weights.
    pub fn from_rows(rows: &[Vec<f64>], log_weights: Vec<f64>, rng_seed: u64) -> Self {
        assert_eq!(rows.len(), log_weights.len());
        let dim = rows.first().map_or(0, |r| r.len());
        let mut states = Vec::with_capacity(dim * rows.len());
        for r in rows {
            assert_eq!(r.len(), dim);
            states.extend_from_slice(r);
        }
        let mut set = Self {
            dim,
            states,
            log_weights,
            rng_seed,
        };
        set.normalize();
        set
    }

    pub fn count(&self) -> usize {
        self.log_weights.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn particle(&self, l: usize) -> &[f64] {
        &self.states[l * self.dim..(l + 1) * self.dim]
    }

    pub fn particle_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.states[l * self.dim..(l + 1) * self.dim]
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub(crate) fn log_weights_mut(&mut self) -> &mut [f64] {
        &mut self.log_weights
    }

    /// Shifts log-weights so their exponentials sum to one.
    pub fn normalize(&mut self) {
        let lse = log_sum_exp(&self.log_weights);
        for w in &mut self.log_weights {
            *w -= lse;
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        let lse = log_sum_exp(&self.log_weights);
        self.log_weights.iter().map(|w| (w - lse).exp()).collect()
    }

    /// True when every log-weight is bitwise equal.
    pub fn has_uniform_weights(&self) -> bool {
        self.log_weights.windows(2).all(|w| w[0] == w[1])
    }

    /// Effective sample size `1 / sum w^2`.
    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights().iter().map(|w| w * w).sum::<f64>()
    }

    /// Systematic resampling; returns the chosen ancestor of each new slot and
    /// leaves uniform weights.
    pub fn resample_systematic<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<usize> {
        let idx = systematic_indices(&self.weights(), rng);
        let mut states = Vec::with_capacity(self.states.len());
        for &i in &idx {
            states.extend_from_slice(self.particle(i));
        }
        self.states = states;
        let n = self.count();
        self.log_weights = vec![-(n as f64).ln(); n];
        idx
    }
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Ancestor indices for systematic resampling of normalized `weights`:
/// one uniform offset, then `n` evenly spaced pointers into the CDF.
pub fn systematic_indices<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let n = weights.len();
    let step = 1.0 / n as f64;
    let mut u = rng.gen::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut i = 0;
    for _ in 0..n {
        while u > cumulative && i + 1 < n {
            i += 1;
            cumulative += weights[i];
        }
        out.push(i);
        u += step;
    }
    out
}
