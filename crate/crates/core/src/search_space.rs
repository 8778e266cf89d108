//! Storage of the truncated search space: directions `w_k ∈ X*`, their
//! precursors `w*_k ∈ Y*` with `w_k = Aᵀ w*_k`, and hyperplane offsets.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SesopError};
use crate::linesearch::{minimize, LineSearchConfig, OrthogonalizationObjective};
use crate::lp::{duality_map_into, norm, pairing, LpSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SearchSpaceMode {
    /// Last `N` Landweber directions as they are.
    Unorthogonalized,
    /// Last `N` directions, each made semi-orthogonal to its predecessors by
    /// metric projection.
    MetricOrthogonalized,
    /// All Landweber directions ever computed.
    Expanding,
}

impl SearchSpaceMode {
    pub fn name(&self) -> &'static str {
        match self {
            SearchSpaceMode::Unorthogonalized => "unorth",
            SearchSpaceMode::MetricOrthogonalized => "metric",
            SearchSpaceMode::Expanding => "expanding",
        }
    }
}

impl fmt::Display for SearchSpaceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SearchSpaceMode {
    type Err = SesopError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unorth" | "unorthogonalized" => Ok(SearchSpaceMode::Unorthogonalized),
            "metric" | "orth" | "orthogonalized" => Ok(SearchSpaceMode::MetricOrthogonalized),
            "expanding" => Ok(SearchSpaceMode::Expanding),
            other => Err(SesopError::Parse(format!(
                "unknown search space mode '{other}'"
            ))),
        }
    }
}

/// Relative size below which an orthogonalized direction is considered to
/// have collapsed into the span of the stored ones.
const DEGENERACY_RATIO: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct SearchSpaceState {
    capacity: usize,
    mode: SearchSpaceMode,
    /// Spec of `X*`, where the directions live.
    dual_space: LpSpec,
    directions: VecDeque<Vec<f64>>,
    precursors: VecDeque<Vec<f64>>,
    offsets: VecDeque<f64>,
}

impl SearchSpaceState {
    /// `space` is the primal space `X`; directions are stored in its dual.
    pub fn new(capacity: usize, mode: SearchSpaceMode, space: LpSpec) -> Result<Self> {
        if capacity == 0 {
            return Err(SesopError::InvalidConfig(
                "search space capacity must be >= 1".into(),
            ));
        }
        Ok(SearchSpaceState {
            capacity,
            mode,
            dual_space: space.dual(),
            directions: VecDeque::new(),
            precursors: VecDeque::new(),
            offsets: VecDeque::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn mode(&self) -> SearchSpaceMode {
        self.mode
    }

    pub fn dual_space(&self) -> LpSpec {
        self.dual_space
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Oldest first.
    pub fn directions(&self) -> Vec<&[f64]> {
        self.directions.iter().map(Vec::as_slice).collect()
    }

    pub fn precursors(&self) -> Vec<&[f64]> {
        self.precursors.iter().map(Vec::as_slice).collect()
    }

    pub fn offsets(&self) -> Vec<f64> {
        self.offsets.iter().copied().collect()
    }

    fn check_dims(&self, d: &[f64], pre: &[f64]) -> Result<()> {
        if d.len() != self.dual_space.dim() {
            return Err(SesopError::DimensionMismatch {
                expected: self.dual_space.dim(),
                actual: d.len(),
                context: "search direction",
            });
        }
        if let Some(first) = self.precursors.front() {
            if first.len() != pre.len() {
                return Err(SesopError::DimensionMismatch {
                    expected: first.len(),
                    actual: pre.len(),
                    context: "search direction precursor",
                });
            }
        }
        Ok(())
    }

    fn append(&mut self, w: Vec<f64>, pre: Vec<f64>, offset: f64) {
        if self.mode != SearchSpaceMode::Expanding && self.directions.len() == self.capacity {
            self.directions.pop_front();
            self.precursors.pop_front();
            self.offsets.pop_front();
        }
        self.directions.push_back(w);
        self.precursors.push_back(pre);
        self.offsets.push_back(offset);
    }

    /// Appends `(d, d*, α)` unchanged, evicting the oldest entry when the
    /// truncated space is full.
    pub fn push_unorthogonalized(
        &mut self,
        d: Vec<f64>,
        precursor: Vec<f64>,
        alpha: f64,
    ) -> Result<()> {
        if self.mode == SearchSpaceMode::MetricOrthogonalized {
            return Err(SesopError::InvalidConfig(
                "push_unorthogonalized called on a metric-orthogonalized search space".into(),
            ));
        }
        self.check_dims(&d, &precursor)?;
        self.append(d, precursor, alpha);
        Ok(())
    }

    /// Replaces `d` by `w = d − Σ s_k w_k`, the residual of its metric
    /// projection onto the span of all currently stored directions, updates
    /// precursor and offset by the same combination, then stores it.
    /// Returns the coefficients `s`.
    pub fn push_orthogonalized(
        &mut self,
        d: Vec<f64>,
        precursor: Vec<f64>,
        alpha: f64,
        ls: &LineSearchConfig,
    ) -> Result<Vec<f64>> {
        if self.mode != SearchSpaceMode::MetricOrthogonalized {
            return Err(SesopError::InvalidConfig(
                "push_orthogonalized requires a metric-orthogonalized search space".into(),
            ));
        }
        self.check_dims(&d, &precursor)?;
        if self.directions.is_empty() {
            self.append(d, precursor, alpha);
            return Ok(Vec::new());
        }

        let ds = self.dual_space;
        let q = ds.power();
        let nd = norm(&d, ds.p());
        let old = self.directions();
        let k = old.len();

        // Start from the projection coefficient onto the newest direction
        // alone, exact in Hilbert space.
        let last = old[k - 1];
        let nl = norm(last, ds.p());
        let mut jl = vec![0.0; last.len()];
        duality_map_into(last, ds.p(), q, &mut jl);
        let mut s0 = vec![0.0; k];
        s0[k - 1] = pairing(&d, &jl) / nl.powf(q);

        let max_w = old.iter().map(|w| norm(w, ds.p())).fold(0.0, f64::max);
        let scale = q * nd.powf(q - 1.0) * max_w;
        let objective = OrthogonalizationObjective::new(&d, old, ds)?;
        let mut cfg = ls.clone().with_initial_point(s0);
        cfg.grad_scale = if scale > 0.0 && scale.is_finite() {
            scale
        } else {
            1.0
        };
        let sol = minimize(&objective, &cfg)?;
        let s = sol.t;

        let w = objective.residual(&s);
        let nw = norm(&w, ds.p());
        if !(nw >= DEGENERACY_RATIO * nd) || nd == 0.0 {
            return Err(SesopError::DegenerateDirection {
                residual_norm: nw,
                direction_norm: nd,
            });
        }
        let mut pre = precursor;
        let mut beta = alpha;
        for (j, &sj) in s.iter().enumerate() {
            for (p, o) in pre.iter_mut().zip(&self.precursors[j]) {
                *p -= sj * o;
            }
            beta -= sj * self.offsets[j];
        }
        self.append(w, pre, beta);
        Ok(s)
    }

    /// Largest scaled pairing `|⟨w_j, J(w_k)⟩| / (‖w_j‖ ‖w_k‖^{q−1})` over
    /// stored pairs `j < k`, with `J` the duality map of `X*`.
    pub fn verify_semi_orthogonality(&self) -> f64 {
        let ds = self.dual_space;
        let q = ds.power();
        let mut worst = 0.0_f64;
        let mut jw = vec![0.0; ds.dim()];
        for k in 1..self.directions.len() {
            let wk = &self.directions[k];
            let nk = norm(wk, ds.p());
            if nk == 0.0 {
                continue;
            }
            duality_map_into(wk, ds.p(), q, &mut jw);
            for j in 0..k {
                let wj = &self.directions[j];
                let nj = norm(wj, ds.p());
                if nj == 0.0 {
                    continue;
                }
                let v = pairing(wj, &jw).abs() / (nj * nk.powf(q - 1.0));
                worst = worst.max(v);
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l2(dim: usize) -> LpSpec {
        LpSpec::new(dim, 2.0, 2.0).unwrap()
    }

    #[test]
    fn fifo_eviction() {
        let mut s = SearchSpaceState::new(2, SearchSpaceMode::Unorthogonalized, l2(2)).unwrap();
        for i in 0..3 {
            let v = i as f64 + 1.0;
            s.push_unorthogonalized(vec![v, 0.0], vec![v], v).unwrap();
        }
        assert_eq!(s.len(), 2);
        assert_eq!(s.directions(), vec![&[2.0, 0.0][..], &[3.0, 0.0][..]]);
        assert_eq!(s.offsets(), vec![2.0, 3.0]);
    }

    #[test]
    fn expanding_keeps_everything() {
        let mut s = SearchSpaceState::new(1, SearchSpaceMode::Expanding, l2(1)).unwrap();
        for i in 0..5 {
            s.push_unorthogonalized(vec![i as f64], vec![0.0], 0.0)
                .unwrap();
        }
        assert_eq!(s.len(), 5);
    }

    #[test]
    fn first_orthogonalized_push_is_identity() {
        let mut s = SearchSpaceState::new(3, SearchSpaceMode::MetricOrthogonalized, l2(2)).unwrap();
        let coeffs = s
            .push_orthogonalized(vec![1.0, 2.0], vec![3.0], 4.0, &LineSearchConfig::default())
            .unwrap();
        assert!(coeffs.is_empty());
        assert_eq!(s.directions(), vec![&[1.0, 2.0][..]]);
        assert_eq!(s.offsets(), vec![4.0]);
        assert_eq!(s.verify_semi_orthogonality(), 0.0);
    }

    #[test]
    fn gram_schmidt_in_hilbert_space() {
        let mut s = SearchSpaceState::new(3, SearchSpaceMode::MetricOrthogonalized, l2(3)).unwrap();
        let ls = LineSearchConfig::new(1e-12, 20);
        s.push_orthogonalized(vec![1.0, 1.0, 0.0], vec![1.0], 1.0, &ls)
            .unwrap();
        let c = s
            .push_orthogonalized(vec![2.0, 0.0, 1.0], vec![0.5], 3.0, &ls)
            .unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12);
        let dirs = s.directions();
        assert!(pairing(dirs[0], dirs[1]).abs() < 1e-12);
        assert!((s.precursors()[1][0] + 0.5).abs() < 1e-12);
        assert!((s.offsets()[1] - 2.0).abs() < 1e-12);
        assert!(s.verify_semi_orthogonality() <= 1e-12);
    }

    #[test]
    fn dependent_direction_is_degenerate() {
        let mut s = SearchSpaceState::new(3, SearchSpaceMode::MetricOrthogonalized, l2(2)).unwrap();
        let ls = LineSearchConfig::new(1e-14, 20);
        s.push_orthogonalized(vec![1.0, 2.0], vec![1.0], 0.0, &ls)
            .unwrap();
        let err = s
            .push_orthogonalized(vec![2.0, 4.0], vec![2.0], 0.0, &ls)
            .unwrap_err();
        assert!(matches!(err, SesopError::DegenerateDirection { .. }));
    }

    #[test]
    fn wrong_mode_and_dimension() {
        let mut s = SearchSpaceState::new(2, SearchSpaceMode::MetricOrthogonalized, l2(2)).unwrap();
        assert!(s
            .push_unorthogonalized(vec![1.0, 0.0], vec![], 0.0)
            .is_err());
        assert!(matches!(
            s.push_orthogonalized(vec![1.0], vec![], 0.0, &LineSearchConfig::default()),
            Err(SesopError::DimensionMismatch { .. })
        ));
        let mut u = SearchSpaceState::new(2, SearchSpaceMode::Unorthogonalized, l2(2)).unwrap();
        assert!(u
            .push_orthogonalized(vec![1.0, 0.0], vec![], 0.0, &LineSearchConfig::default())
            .is_err());
        assert!(SearchSpaceState::new(0, SearchSpaceMode::Expanding, l2(2)).is_err());
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [
            SearchSpaceMode::Unorthogonalized,
            SearchSpaceMode::MetricOrthogonalized,
            SearchSpaceMode::Expanding,
        ] {
            assert_eq!(m.name().parse::<SearchSpaceMode>().unwrap(), m);
        }
        assert!("bogus".parse::<SearchSpaceMode>().is_err());
    }
}
