//! Centralized numeric tolerances.
//!
//! Every threshold used by the library is defined here so that a run is
//! reproducible from its report alone. All tolerances are relative to the
//! operator 2-norm of the matrix they apply to (scaled by `max(1, norm)`)
//! unless a doc comment says otherwise.
//!
//! | field              | default | used by                                        |
//! |--------------------|---------|------------------------------------------------|
//! | `validation`       | 1e-10   | Hermitian/unitarity/commutation defects, margin |
//! | `cluster_rel`      | 1e-8    | eigenvalue clustering in the joint eigenbasis   |
//! | `residual`         | 1e-9    | per-mode eigenpair residuals                    |
//! | `oracle_set`       | 1e-10   | formula vs characteristic eigenvalue sets       |
//! | `char_residual`    | 1e-8    | characteristic residual at formula eigenvalues  |
//! | `gram_offdiag`     | 1e-8    | eigenfunction Gram off-diagonal magnitude       |
//! | `boundary`         | 1e-10   | boundary cancellation (scaled)                  |
//!
//! The environment variable `NORMEXT_TOL_PROFILE` selects a base profile
//! (`strict`, `default`, `relaxed`); explicit per-run overrides win over the
//! profile.

/// Tolerance bundle threaded through validation and verification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Block validation: defect thresholds and positivity margin slack.
    pub validation: f64,
    /// Relative gap (times `‖A‖`) below which A-eigenvalues form one cluster.
    pub cluster_rel: f64,
    /// Eigenpair residual `‖Av - αv‖`, `‖Wv - ωv‖` for unit `v`.
    pub residual: f64,
    /// Hausdorff distance between formula and characteristic eigenvalue sets.
    pub oracle_set: f64,
    /// Scaled characteristic residual at formula eigenvalues.
    pub char_residual: f64,
    /// Off-diagonal magnitude in the eigenfunction Gram matrix.
    pub gram_offdiag: f64,
    /// Scaled boundary-cancellation value for commuting pairs.
    pub boundary: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            validation: 1e-10,
            cluster_rel: 1e-8,
            residual: 1e-9,
            oracle_set: 1e-10,
            char_residual: 1e-8,
            gram_offdiag: 1e-8,
            boundary: 1e-10,
        }
    }
}

impl Tolerances {
    /// Profile scaled down 10x, for inputs known to be exact.
    pub fn strict() -> Self {
        Self::default().scaled(0.1)
    }

    /// Profile scaled up 100x, for inputs carrying measurement noise.
    pub fn relaxed() -> Self {
        Self::default().scaled(100.0)
    }

    fn scaled(self, factor: f64) -> Self {
        Self {
            validation: self.validation * factor,
            cluster_rel: self.cluster_rel * factor,
            residual: self.residual * factor,
            oracle_set: self.oracle_set * factor,
            char_residual: self.char_residual * factor,
            gram_offdiag: self.gram_offdiag * factor,
            boundary: self.boundary * factor,
        }
    }

    /// Resolve the base profile from `NORMEXT_TOL_PROFILE`.
    ///
    /// Unknown values fall back to the default profile.
    pub fn from_env() -> Self {
        match std::env::var("NORMEXT_TOL_PROFILE").as_deref() {
            Ok("strict") => Self::strict(),
            Ok("relaxed") => Self::relaxed(),
            _ => Self::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_scale_every_field() {
        let d = Tolerances::default();
        let s = Tolerances::strict();
        let r = Tolerances::relaxed();
        assert!(s.validation < d.validation && d.validation < r.validation);
        assert!(s.gram_offdiag < d.gram_offdiag && d.gram_offdiag < r.gram_offdiag);
    }
}
