//! Count simulation and density-matrix reconstruction.
//!
//! Records are grouped per analyzer setting into [`TomographyData`], then
//! reconstructed by [`linear_inversion`] (least squares over the Pauli basis)
//! or [`mle_reconstruct`] (Poisson maximum likelihood over `T^dagger T / Tr`).

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::catalog::{self, Gate};
use crate::error::{Error, Result};
use crate::linalg::{c, DensityMatrix, Ket, Operator, Tensor, C64};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::povm::OutcomeLabel;

/// Integration time attached to simulated records, in seconds.
pub const DEFAULT_DURATION_S: f64 = 8.0;

/// Expected coincidences per analyzer setting at full transmission.
pub const DEFAULT_MEAN_COUNTS: f64 = 24_000.0;

/// Floor applied to predicted means inside the logarithm.
pub const MEAN_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct AnalyzerSetting {
    pub label: String,
    pub projector: Operator,
}

/// Single-qubit analyzer state for one of `H V D A R L`.
pub fn eigenstate(symbol: char) -> Result<Ket> {
    let (phi, theta) = match symbol {
        'H' => (0.0, 0.0),
        'V' => (PI, 0.0),
        'D' => (FRAC_PI_2, 0.0),
        'A' => (FRAC_PI_2, PI),
        'R' => (FRAC_PI_2, FRAC_PI_2),
        'L' => (FRAC_PI_2, -FRAC_PI_2),
        _ => return Err(Error::UnknownLabel(symbol.to_string())),
    };
    Ok(catalog::psi(phi, theta))
}

impl AnalyzerSetting {
    pub fn from_ket(label: impl Into<String>, ket: &Ket) -> Self {
        AnalyzerSetting { label: label.into(), projector: ket.projector() }
    }

    /// Checks idempotence and unit trace.
    pub fn from_projector(label: impl Into<String>, projector: Operator) -> Result<Self> {
        let tol = 1e-10;
        let square = &projector * &projector;
        if square.max_abs_diff(&projector) > tol {
            return Err(Error::InvalidParameter("analyzer projector is not idempotent".into()));
        }
        let tr = projector.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::BadTrace(tr.re));
        }
        Ok(AnalyzerSetting { label: label.into(), projector })
    }

    /// `"H"`, `"R"`, ... for one qubit; `"HV"`, `"DL"`, ... for two.
    pub fn from_label(label: &str) -> Result<Self> {
        let symbols: Vec<char> = label.chars().collect();
        if symbols.is_empty() || symbols.len() > 2 {
            return Err(Error::UnknownLabel(label.to_string()));
        }
        let mut ket = eigenstate(symbols[0]).map_err(|_| Error::UnknownLabel(label.to_string()))?;
        for &s in &symbols[1..] {
            ket = ket.tensor(&eigenstate(s).map_err(|_| Error::UnknownLabel(label.to_string()))?);
        }
        Ok(Self::from_ket(label, &ket))
    }

    pub fn dim(&self) -> usize {
        self.projector.dim()
    }

    pub fn probability(&self, rho: &DensityMatrix) -> f64 {
        self.projector.trace_product(rho.operator()).re.max(0.0)
    }
}

const PAULI_SYMBOLS: [char; 6] = ['H', 'V', 'D', 'A', 'R', 'L'];

/// The six eigenstates of X, Y and Z.
pub fn pauli_settings() -> Vec<AnalyzerSetting> {
    PAULI_SYMBOLS.iter().map(|s| AnalyzerSetting::from_label(&s.to_string()).expect("known symbol")).collect()
}

/// All 36 two-qubit products of the Pauli eigenstates.
pub fn pauli_product_settings() -> Vec<AnalyzerSetting> {
    let mut out = Vec::with_capacity(36);
    for a in PAULI_SYMBOLS {
        for b in PAULI_SYMBOLS {
            out.push(AnalyzerSetting::from_label(&format!("{a}{b}")).expect("known symbols"));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountRecord {
    pub setting: AnalyzerSetting,
    pub outcome: Option<OutcomeLabel>,
    pub count: u64,
    pub duration: f64,
}

#[derive(Serialize, Deserialize)]
struct CountRow {
    setting_label: String,
    outcome_label: String,
    count: u64,
    duration: f64,
}

pub fn write_records_csv<W: Write>(records: &[CountRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(CountRow {
            setting_label: r.setting.label.clone(),
            outcome_label: r.outcome.map(|o| o.to_string()).unwrap_or_default(),
            count: r.count,
            duration: r.duration,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Setting labels must be eigenstate names accepted by [`AnalyzerSetting::from_label`].
pub fn read_records_csv<R: Read>(reader: R) -> Result<Vec<CountRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: CountRow = row?;
        if row.duration.is_nan() || row.duration <= 0.0 {
            return Err(Error::InvalidParameter(format!("duration {} must be positive", row.duration)));
        }
        let outcome = if row.outcome_label.is_empty() { None } else { Some(row.outcome_label.parse()?) };
        out.push(CountRecord {
            setting: AnalyzerSetting::from_label(&row.setting_label)?,
            outcome,
            count: row.count,
            duration: row.duration,
        });
    }
    Ok(out)
}

/// Seed for item `index` of a run seeded with `base`. Mixing both inputs
/// through SplitMix64 keeps seeds of different runs and items apart.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(base) ^ index)
}

/// One Poisson draw from the stream `stream` of a ChaCha8 generator seeded
/// with `seed`. A non-positive mean gives 0.
pub fn sample_poisson(seed: u64, stream: u64, mean: f64) -> u64 {
    if mean.is_nan() || mean <= 0.0 {
        return 0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let draw: f64 = Poisson::new(mean).expect("finite positive mean").sample(&mut rng);
    draw as u64
}

/// Independent Poisson counts with mean `mean_total_per_setting * Tr(P rho)`
/// per setting. Setting `i` draws from its own stream so the result does not
/// depend on evaluation order.
pub fn simulate_counts(
    rho: &DensityMatrix,
    settings: &[AnalyzerSetting],
    mean_total_per_setting: f64,
    seed: u64,
) -> Vec<CountRecord> {
    settings
        .iter()
        .enumerate()
        .map(|(i, s)| CountRecord {
            setting: s.clone(),
            outcome: None,
            count: sample_poisson(seed, i as u64, mean_total_per_setting * s.probability(rho)),
            duration: DEFAULT_DURATION_S,
        })
        .collect()
}

/// Counts summed per distinct analyzer setting, in first-seen order.
/// Counts are real so exact expected values can stand in for samples.
#[derive(Clone, Debug)]
pub struct TomographyData {
    labels: Vec<String>,
    projectors: Vec<Operator>,
    counts: Vec<f64>,
}

impl TomographyData {
    pub fn from_records(records: &[CountRecord]) -> Result<Self> {
        let mut data = TomographyData { labels: Vec::new(), projectors: Vec::new(), counts: Vec::new() };
        let mut index: HashMap<String, usize> = HashMap::new();
        for r in records {
            data.add(&mut index, &r.setting, r.count as f64)?;
        }
        data.check()?;
        Ok(data)
    }

    pub fn from_tallies(tallies: Vec<(AnalyzerSetting, f64)>) -> Result<Self> {
        let mut data = TomographyData { labels: Vec::new(), projectors: Vec::new(), counts: Vec::new() };
        let mut index: HashMap<String, usize> = HashMap::new();
        for (s, n) in &tallies {
            if !n.is_finite() || *n < 0.0 {
                return Err(Error::InvalidParameter(format!("count {n} for {}", s.label)));
            }
            data.add(&mut index, s, *n)?;
        }
        data.check()?;
        Ok(data)
    }

    /// Expected counts `mean * Tr(P rho)` with no sampling noise.
    pub fn exact(rho: &DensityMatrix, settings: &[AnalyzerSetting], mean: f64) -> Result<Self> {
        Self::from_tallies(settings.iter().map(|s| (s.clone(), mean * s.probability(rho))).collect())
    }

    fn add(&mut self, index: &mut HashMap<String, usize>, s: &AnalyzerSetting, n: f64) -> Result<()> {
        if let Some(&d) = self.projectors.first().map(|p| p.dim()).as_ref() {
            if s.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: s.dim() });
            }
        }
        match index.get(&s.label) {
            Some(&i) => self.counts[i] += n,
            None => {
                index.insert(s.label.clone(), self.labels.len());
                self.labels.push(s.label.clone());
                self.projectors.push(s.projector.clone());
                self.counts.push(n);
            }
        }
        Ok(())
    }

    fn check(&self) -> Result<()> {
        if self.projectors.is_empty() || self.total() <= 0.0 {
            return Err(Error::NoCounts);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    /// Poisson log-likelihood `sum n log mu - mu` with `mu = N Tr(P rho)`.
    pub fn log_likelihood(&self, rho: &DensityMatrix, n_total: f64) -> f64 {
        self.projectors
            .iter()
            .zip(&self.counts)
            .map(|(p, &n)| {
                let mu = (n_total * p.trace_product(rho.operator()).re).max(MEAN_FLOOR);
                if n > 0.0 {
                    n * mu.ln() - mu
                } else {
                    -mu
                }
            })
            .sum()
    }

    /// Flux estimate `sum n / sum Tr(P rho)` that maximizes the likelihood for fixed `rho`.
    pub fn profiled_flux(&self, rho: &DensityMatrix) -> f64 {
        let p: f64 = self.projectors.iter().map(|q| q.trace_product(rho.operator()).re).sum();
        self.total() / p.max(MEAN_FLOOR)
    }
}

fn pauli_basis(n_qubits: usize) -> Vec<Operator> {
    let singles = [Operator::identity(2), Gate::X.matrix(), Gate::Y.matrix(), Gate::Z.matrix()];
    let mut basis = singles.to_vec();
    for _ in 1..n_qubits {
        basis = basis.iter().flat_map(|b| singles.iter().map(move |s| b.tensor(s))).collect();
    }
    basis
}

/// Least-squares solve of `Tr(P_i X) = n_i` over Hermitian `X`, then `X / Tr X`.
/// The result is Hermitian with unit trace but may have negative eigenvalues.
pub fn linear_inversion_data(data: &TomographyData) -> Result<Operator> {
    let d = data.dim();
    let basis = pauli_basis(d.trailing_zeros() as usize);
    let m = data.projectors.len();
    let k = basis.len();
    let design = DMatrix::from_fn(m, k, |i, j| data.projectors[i].trace_product(&basis[j]).re / d as f64);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax.max(1.0)).count();
    if rank < k {
        return Err(Error::RankDeficient { rank, required: k });
    }
    let rhs = DVector::from_column_slice(&data.counts);
    let coeffs = svd.solve(&rhs, 1e-12).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut acc = Operator::zeros(d);
    for (b, &r) in basis.iter().zip(coeffs.iter()) {
        acc = &acc + &b.scale_real(r / d as f64);
    }
    let tr = acc.trace().re;
    if tr.is_nan() || tr <= 0.0 {
        return Err(Error::NoCounts);
    }
    Ok(acc.scale_real(1.0 / tr).hermitian_part())
}

pub fn linear_inversion(records: &[CountRecord]) -> Result<Operator> {
    linear_inversion_data(&TomographyData::from_records(records)?)
}

/// Projection onto states: negative eigenvalues set to zero, trace restored.
pub fn clamp_to_state(op: &Operator) -> Result<DensityMatrix> {
    let (vals, vecs) = op.hermitian_part().eigh();
    let d = op.dim();
    let mut m = DMatrix::<C64>::zeros(d, d);
    for (i, &v) in vals.iter().enumerate() {
        if v > 0.0 {
            let col = vecs.column(i);
            m += col * col.adjoint() * c(v, 0.0);
        }
    }
    DensityMatrix::normalized(Operator::from_matrix(m)?)
}

/// Lower-triangular `T` with `T^dagger T = rho`: a Cholesky factor of the
/// index-reversed matrix, reversed back. Vanishing pivots zero their column.
fn triangular_factor(rho: &DensityMatrix) -> DMatrix<C64> {
    let d = rho.dim();
    let a = DMatrix::from_fn(d, d, |i, j| rho.get(d - 1 - i, d - 1 - j));
    let mut l = DMatrix::<C64>::zeros(d, d);
    for j in 0..d {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)].conj();
        }
        let pivot = diag.re;
        if pivot <= 1e-14 {
            continue;
        }
        let root = pivot.sqrt();
        l[(j, j)] = c(root, 0.0);
        for i in j + 1..d {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / root;
        }
    }
    let upper = DMatrix::from_fn(d, d, |i, j| l[(d - 1 - i, d - 1 - j)]);
    upper.adjoint()
}

/// `T` packed as `d` real diagonal entries then the strictly lower entries
/// row by row as `(re, im)` pairs.
fn pack(t: &DMatrix<C64>) -> Vec<f64> {
    let d = t.nrows();
    let mut v: Vec<f64> = (0..d).map(|i| t[(i, i)].re).collect();
    for i in 1..d {
        for j in 0..i {
            v.push(t[(i, j)].re);
            v.push(t[(i, j)].im);
        }
    }
    v
}

fn unpack(v: &[f64], d: usize) -> DMatrix<C64> {
    let mut t = DMatrix::<C64>::zeros(d, d);
    for i in 0..d {
        t[(i, i)] = c(v[i], 0.0);
    }
    let mut k = d;
    for i in 1..d {
        for j in 0..i {
            t[(i, j)] = c(v[k], v[k + 1]);
            k += 2;
        }
    }
    t
}

/// Normalized state for a packed `T`. Returns `None` for `T = 0`.
pub fn state_from_parameters(params: &[f64], dim: usize) -> Option<DensityMatrix> {
    let t = unpack(params, dim);
    let m = t.adjoint() * &t;
    let tr = m.trace().re;
    if tr.is_nan() || tr <= 0.0 {
        return None;
    }
    let op = Operator::from_matrix(m.map(|x| x / tr)).ok()?;
    DensityMatrix::normalized(op.hermitian_part()).ok()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MleOptions {
    pub max_evaluations: usize,
    /// Parameter-step tolerance.
    pub xtol: f64,
    /// Tolerance on the log-likelihood change divided by the total count.
    pub ftol: f64,
    pub initial_step: f64,
    pub max_restarts: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions { max_evaluations: 100_000, xtol: 1e-9, ftol: 1e-9, initial_step: 0.02, max_restarts: 8 }
    }
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix,
    pub log_likelihood: f64,
    /// Objective evaluations used.
    pub iterations: usize,
    pub converged: bool,
}

/// Poisson maximum likelihood over `rho = T^dagger T / Tr(T^dagger T)`.
///
/// The unknown flux is profiled out, leaving the objective
/// `sum_i n_i ln(n_i / mu_i) / sum_i n_i` with `mu_i = N_hat Tr(P_i rho)`,
/// which is minimized by simplex descent from the clamped linear inversion
/// together with a penalty fixing the scale of `T`.
pub fn mle_reconstruct_data(data: &TomographyData, opts: &MleOptions) -> Result<ReconstructionResult> {
    let d = data.dim();
    let start = clamp_to_state(&linear_inversion_data(data)?)?;
    let x0 = pack(&triangular_factor(&start));
    let total = data.total();
    let projectors: Vec<DMatrix<C64>> = data.projectors.iter().map(|p| p.matrix().transpose()).collect();
    let counts = data.counts.clone();

    let objective = |x: &[f64]| -> f64 {
        let t = unpack(x, d);
        let m = t.adjoint() * &t;
        let tr = m.trace().re;
        if tr.is_nan() || tr <= 0.0 {
            return f64::INFINITY;
        }
        let probs: Vec<f64> = projectors.iter().map(|pt| pt.component_mul(&m).sum().re / tr).collect();
        let flux = total / probs.iter().sum::<f64>().max(MEAN_FLOOR);
        let mut kl = 0.0;
        for (&n, &p) in counts.iter().zip(&probs) {
            if n > 0.0 {
                kl += n * (n / (flux * p).max(MEAN_FLOOR)).ln();
            }
        }
        // rho ignores the scale of T; the penalty pins Tr(T^dagger T) = 1 so the
        // simplex has no flat direction to wander along
        kl / total + (tr - 1.0).powi(2)
    };

    let nm = NelderMeadOptions {
        initial_step: opts.initial_step,
        xtol: opts.xtol,
        ftol: opts.ftol,
        max_evaluations: opts.max_evaluations,
        max_restarts: opts.max_restarts,
    };
    let found = nelder_mead(objective, &x0, &nm);
    let rho = state_from_parameters(&found.x, d).ok_or(Error::NoCounts)?;
    let flux = data.profiled_flux(&rho);
    Ok(ReconstructionResult {
        log_likelihood: data.log_likelihood(&rho, flux),
        rho,
        iterations: found.evaluations,
        converged: found.converged,
    })
}

pub fn mle_reconstruct(records: &[CountRecord]) -> Result<ReconstructionResult> {
    mle_reconstruct_data(&TomographyData::from_records(records)?, &MleOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{fidelity, fidelity_with_ket, trace_distance};

    fn werner(p: f64) -> DensityMatrix {
        DensityMatrix::from_ket(&catalog::phi_plus()).mix(&DensityMatrix::maximally_mixed(4).unwrap(), p).unwrap()
    }

    #[test]
    fn labels_map_to_eigenstates() {
        let x = Gate::X.matrix();
        let y = Gate::Y.matrix();
        let z = Gate::Z.matrix();
        for (label, op, sign) in
            [("H", &z, 1.0), ("V", &z, -1.0), ("D", &x, 1.0), ("A", &x, -1.0), ("R", &y, 1.0), ("L", &y, -1.0)]
        {
            let s = AnalyzerSetting::from_label(label).unwrap();
            assert!((s.projector.trace_product(op).re - sign).abs() < 1e-14, "{label}");
        }
        assert!(matches!(AnalyzerSetting::from_label("Q"), Err(Error::UnknownLabel(_))));
        assert!(matches!(AnalyzerSetting::from_label("HVH"), Err(Error::UnknownLabel(_))));
        assert_eq!(pauli_product_settings().len(), 36);
    }

    #[test]
    fn projector_validation() {
        let bad = Operator::identity(2).scale_real(0.5);
        assert!(AnalyzerSetting::from_projector("half", bad).is_err());
        assert!(AnalyzerSetting::from_projector("H", catalog::zero().projector()).is_ok());
    }

    #[test]
    fn orthogonal_setting_never_clicks() {
        let h = DensityMatrix::from_ket(&catalog::zero());
        let v = AnalyzerSetting::from_label("V").unwrap();
        for seed in 0..50 {
            assert_eq!(simulate_counts(&h, std::slice::from_ref(&v), 24_000.0, seed)[0].count, 0);
        }
    }

    #[test]
    fn poisson_mean_matches() {
        let plus = DensityMatrix::from_ket(&catalog::plus());
        let h = AnalyzerSetting::from_label("H").unwrap();
        let n = 1000;
        let mean: f64 =
            (0..n).map(|s| simulate_counts(&plus, std::slice::from_ref(&h), 24_000.0, s)[0].count as f64).sum::<f64>()
                / n as f64;
        assert!((mean - 12_000.0).abs() < 3.0 * (12_000.0f64 / n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn simulation_is_reproducible_and_order_independent() {
        let rho = DensityMatrix::from_ket(&catalog::psi(1.0, 0.3));
        let settings = pauli_settings();
        let a = simulate_counts(&rho, &settings, 24_000.0, 7);
        let b = simulate_counts(&rho, &settings, 24_000.0, 7);
        assert_eq!(a, b);
        for (i, (r, s)) in a.iter().zip(&settings).enumerate() {
            assert_eq!(r.count, sample_poisson(7, i as u64, 24_000.0 * s.probability(&rho)));
        }
    }

    #[test]
    fn derived_seeds_do_not_collide() {
        let mut seen = std::collections::HashSet::new();
        for base in 0..64u64 {
            for i in 0..256u64 {
                assert!(seen.insert(derive_seed(base, i)));
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let rho = DensityMatrix::from_ket(&catalog::psi(1.0, 0.3));
        let mut records = simulate_counts(&rho, &pauli_settings(), 1000.0, 3);
        records[0].outcome = Some(OutcomeLabel::RT);
        let mut buf = Vec::new();
        write_records_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("setting_label,outcome_label,count,duration"));
        assert_eq!(read_records_csv(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn csv_rejects_bad_duration() {
        let text = "setting_label,outcome_label,count,duration\nH,,10,0\n";
        assert!(read_records_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn linear_inversion_exact_data() {
        let plus = DensityMatrix::from_ket(&catalog::plus());
        let data = TomographyData::exact(&plus, &pauli_settings(), 1.0).unwrap();
        assert!(linear_inversion_data(&data).unwrap().approx_eq(plus.operator(), 1e-10));
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let data = TomographyData::exact(&mixed, &pauli_settings(), 500.0).unwrap();
        assert!(linear_inversion_data(&data).unwrap().approx_eq(mixed.operator(), 1e-10));
    }

    #[test]
    fn linear_inversion_with_noise_can_leave_state_space() {
        let h = catalog::zero().projector();
        let tallies = vec![
            (AnalyzerSetting::from_label("H").unwrap(), 1000.0),
            (AnalyzerSetting::from_label("V").unwrap(), 0.0),
            (AnalyzerSetting::from_label("D").unwrap(), 620.0),
            (AnalyzerSetting::from_label("A").unwrap(), 380.0),
            (AnalyzerSetting::from_label("R").unwrap(), 500.0),
            (AnalyzerSetting::from_label("L").unwrap(), 500.0),
        ];
        let op = linear_inversion_data(&TomographyData::from_tallies(tallies).unwrap()).unwrap();
        assert!(op.is_hermitian(1e-12));
        assert!((op.trace().re - 1.0).abs() < 1e-12);
        assert!(op.min_eigenvalue() < 0.0);
        assert!(h.trace_product(&op).re > 0.99);
    }

    #[test]
    fn incomplete_settings_are_rank_deficient() {
        let rho = DensityMatrix::from_ket(&catalog::plus());
        let z_only: Vec<_> = ["H", "V"].iter().map(|l| AnalyzerSetting::from_label(l).unwrap()).collect();
        let data = TomographyData::exact(&rho, &z_only, 100.0).unwrap();
        assert!(matches!(linear_inversion_data(&data), Err(Error::RankDeficient { rank: 2, required: 4 })));
    }

    #[test]
    fn empty_data_is_rejected() {
        assert!(matches!(TomographyData::from_records(&[]), Err(Error::NoCounts)));
        let rho = DensityMatrix::from_ket(&catalog::plus());
        assert!(matches!(TomographyData::exact(&rho, &pauli_settings(), 0.0), Err(Error::NoCounts)));
    }

    #[test]
    fn factor_round_trip() {
        let mixed = DensityMatrix::from_ket(&catalog::psi(0.9, 0.2))
            .mix(&DensityMatrix::maximally_mixed(2).unwrap(), 0.8)
            .unwrap();
        let pure = DensityMatrix::from_ket(&catalog::psi(1.2, -2.0));
        let w = werner(0.6);
        for rho in [mixed, pure, w] {
            let t = triangular_factor(&rho);
            for i in 0..rho.dim() {
                for j in i + 1..rho.dim() {
                    assert_eq!(t[(i, j)], c(0.0, 0.0));
                }
            }
            let back = state_from_parameters(&pack(&t), rho.dim()).unwrap();
            assert!(back.approx_eq(&rho, 1e-10));
        }
    }

    #[test]
    fn mle_exact_pure_state() {
        let k = catalog::psi(1.2, 0.4);
        let rho = DensityMatrix::from_ket(&k);
        let data = TomographyData::exact(&rho, &pauli_settings(), DEFAULT_MEAN_COUNTS).unwrap();
        let r = mle_reconstruct_data(&data, &MleOptions::default()).unwrap();
        assert!(r.converged);
        assert!(fidelity_with_ket(&r.rho, &k).unwrap() > 1.0 - 1e-8);
    }

    #[test]
    fn mle_fixes_unphysical_inversion() {
        let tallies = vec![
            (AnalyzerSetting::from_label("H").unwrap(), 1000.0),
            (AnalyzerSetting::from_label("V").unwrap(), 0.0),
            (AnalyzerSetting::from_label("D").unwrap(), 620.0),
            (AnalyzerSetting::from_label("A").unwrap(), 380.0),
            (AnalyzerSetting::from_label("R").unwrap(), 500.0),
            (AnalyzerSetting::from_label("L").unwrap(), 500.0),
        ];
        let data = TomographyData::from_tallies(tallies).unwrap();
        let r = mle_reconstruct_data(&data, &MleOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.rho.operator().min_eigenvalue() > -1e-12);
        let clamped = clamp_to_state(&linear_inversion_data(&data).unwrap()).unwrap();
        let flux = data.total() / 3.0;
        assert!(r.log_likelihood >= data.log_likelihood(&clamped, flux) - 1e-9);
    }

    #[test]
    fn mle_statistical_regime_single_qubit() {
        let k = catalog::psi(0.8, 2.5);
        let rho = DensityMatrix::from_ket(&k);
        let settings = pauli_settings();
        let mut total = 0.0;
        let trials = 100;
        for seed in 0..trials {
            let records = simulate_counts(&rho, &settings, DEFAULT_MEAN_COUNTS, seed);
            let r = mle_reconstruct(&records).unwrap();
            assert!(r.converged);
            total += 1.0 - fidelity_with_ket(&r.rho, &k).unwrap();
        }
        let mean = total / trials as f64;
        // pure truth sits on the boundary, so the purity deficit is linear in the noise
        assert!(mean > 2e-4 && mean < 5e-3, "mean infidelity {mean}");
    }

    #[test]
    fn two_qubit_werner_reconstruction() {
        let w = werner(0.95);
        let records = simulate_counts(&w, &pauli_product_settings(), DEFAULT_MEAN_COUNTS, 11);
        let r = mle_reconstruct(&records).unwrap();
        assert!(trace_distance(&r.rho, &w).unwrap() < 0.02);
        assert!(fidelity(&r.rho, &w).unwrap() > 0.99);
    }
}
