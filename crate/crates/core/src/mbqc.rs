//! Measurement-based computation on small clusters.
//!
//! Two routes to the same single-qubit output:
//!
//! * [`run_projective_mbqc`] measures every non-output qubit of a linear
//!   cluster in the equatorial `|alpha_+->` family with adaptive signs, then
//!   undoes the accumulated Pauli byproduct on the output qubit;
//! * [`run_povm_mbqc`] measures the first qubit of a two-qubit resource with
//!   the four-outcome POVM and applies the Pockels-cell correction to the second.
//!
//! Measuring a chain qubit at angle `a` implements `H Z_(a)` on the logical
//! qubit (up to byproducts), so the three-qubit chain measured at
//! `(b1, b2)` outputs `Rx(b2) Rz(b1) |+>`; [`chain_angles`] picks the angles
//! that land on `|psi(phi, theta)>`.

use serde::{Deserialize, Serialize};

use crate::catalog::{self, Gate};
use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, Ket, Operator, C64};
use crate::povm::{self, measure, sandwich_update, OutcomeLabel, Povm, ZERO_PROBABILITY};

/// Graph layout of a small cluster.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub n_qubits: usize,
    /// 1-based qubit pairs joined by CZ.
    pub edges: Vec<(usize, usize)>,
    pub output_qubit: usize,
}

impl ClusterSpec {
    /// Chain `1-2-...-n` with the last qubit as output.
    pub fn linear(n_qubits: usize) -> Self {
        ClusterSpec { n_qubits, edges: (1..n_qubits).map(|q| (q, q + 1)).collect(), output_qubit: n_qubits }
    }

    pub fn input_qubits(&self) -> Vec<usize> {
        (1..=self.n_qubits).filter(|&q| q != self.output_qubit).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.n_qubits) {
            return Err(Error::UnsupportedQubits(self.n_qubits));
        }
        if self.output_qubit == 0 || self.output_qubit > self.n_qubits {
            return Err(Error::InvalidCluster(format!("output qubit {} out of range", self.output_qubit)));
        }
        for &(a, b) in &self.edges {
            if a == 0 || b == 0 || a > self.n_qubits || b > self.n_qubits || a == b {
                return Err(Error::InvalidCluster(format!("edge ({a}, {b})")));
            }
        }
        Ok(())
    }
}

/// CZ over every edge applied to `|+>^n`.
pub fn build_cluster(spec: &ClusterSpec) -> Result<Ket> {
    spec.validate()?;
    let mut state = catalog::plus_register(spec.n_qubits);
    for &(a, b) in &spec.edges {
        state = catalog::controlled_z(spec.n_qubits, a, b)?.apply(&state)?;
    }
    Ok(state)
}

/// Equatorial measurement angles, one per non-output qubit of a linear chain,
/// in qubit order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPlan {
    pub angles: Vec<f64>,
}

/// Byproduct `X^x Z^z` carried by a qubit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PauliFrame {
    pub x: bool,
    pub z: bool,
}

impl PauliFrame {
    pub fn compose(self, other: PauliFrame) -> PauliFrame {
        PauliFrame { x: self.x ^ other.x, z: self.z ^ other.z }
    }

    /// `X^x Z^z`
    pub fn operator(self) -> Operator {
        let mut op = Operator::identity(2);
        if self.x {
            op = &op * &Gate::X.matrix();
        }
        if self.z {
            op = &op * &Gate::Z.matrix();
        }
        op
    }

    /// Inverse of [`Self::operator`], applied to undo the byproduct.
    pub fn correction(self) -> Operator {
        self.operator().adjoint()
    }

    /// Frame on the next chain qubit after measuring this one with raw outcome
    /// `outcome` (true for the `-` result). A Z byproduct flips the outcome and
    /// the Hadamard of the teleportation step swaps X and Z.
    pub fn propagate(self, outcome: bool) -> PauliFrame {
        PauliFrame { x: outcome ^ self.z, z: self.x }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BranchRecord {
    /// Raw outcomes per measured qubit, `true` for `-`.
    Projective(Vec<bool>),
    Povm(OutcomeLabel),
}

#[derive(Clone, Debug)]
pub struct BranchResult {
    pub record: BranchRecord,
    pub probability: f64,
    /// `None` for zero-probability branches.
    pub corrected_output: Option<DensityMatrix>,
}

/// Probability-weighted mixture of the corrected outputs.
pub fn branch_mixture(branches: &[BranchResult]) -> Result<DensityMatrix> {
    let mut acc = Operator::zeros(2);
    for b in branches {
        if let Some(out) = &b.corrected_output {
            acc = &acc + &out.operator().scale_real(b.probability);
        }
    }
    DensityMatrix::normalized(acc)
}

/// Contracts the leading qubit of `amps` with `<basis|`.
fn project_leading(amps: &[C64], basis: &Ket) -> Vec<C64> {
    let half = amps.len() / 2;
    let (b0, b1) = (basis.amplitudes()[0].conj(), basis.amplitudes()[1].conj());
    (0..half).map(|i| b0 * amps[i] + b1 * amps[half + i]).collect()
}

/// Brute-force enumeration of every outcome branch of a linear-chain
/// computation. Qubits `1..n-1` are measured in order; qubit `n` is the output.
pub fn run_projective_mbqc(cluster: &Ket, plan: &MeasurementPlan) -> Result<Vec<BranchResult>> {
    let n = cluster.n_qubits();
    if !(2..=3).contains(&n) {
        return Err(Error::UnsupportedQubits(n));
    }
    if plan.angles.len() != n - 1 {
        return Err(Error::PlanLength { expected: n - 1, found: plan.angles.len() });
    }
    let measured = n - 1;
    let mut branches = Vec::with_capacity(1 << measured);
    for pattern in 0..1usize << measured {
        let outcomes: Vec<bool> = (0..measured).map(|j| (pattern >> (measured - 1 - j)) & 1 == 1).collect();
        let mut amps = cluster.amplitudes().to_vec();
        let mut frame = PauliFrame::default();
        for (angle, &outcome) in plan.angles.iter().zip(&outcomes) {
            let adapted = if frame.x { -angle } else { *angle };
            amps = project_leading(&amps, &catalog::alpha(adapted, !outcome));
            frame = frame.propagate(outcome);
        }
        let probability: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let corrected_output = if probability > ZERO_PROBABILITY {
            let out = Ket::new(amps)?;
            Some(DensityMatrix::from_ket(&out).conjugate_by(&frame.correction()))
        } else {
            None
        };
        branches.push(BranchResult { record: BranchRecord::Projective(outcomes), probability, corrected_output });
    }
    Ok(branches)
}

/// Rotation angles `(z_angle, x_angle)` with `Rx(x_angle) Rz(z_angle) |+> ~ |psi(phi, theta)>`.
///
/// `Rz(b1)|+>` sits on the equator at azimuth `-b1`; `Rx(b2)` then turns the
/// Bloch vector about x by `-b2`. Matching Bloch components gives
/// `cos b1 = sin(phi) cos(theta)` and `(sin b1 sin b2, -sin b1 cos b2) = (cos phi, sin phi sin theta)`.
pub fn chain_angles(phi: f64, theta: f64) -> (f64, f64) {
    let x = phi.sin() * theta.cos();
    let z_angle = x.clamp(-1.0, 1.0).acos();
    let x_angle = phi.cos().atan2(-phi.sin() * theta.sin());
    (z_angle, x_angle)
}

/// Measurement plan for the three-qubit chain that prepares `|psi(phi, theta)>`.
pub fn chain_plan(phi: f64, theta: f64) -> MeasurementPlan {
    let (a, b) = chain_angles(phi, theta);
    MeasurementPlan { angles: vec![a, b] }
}

/// Circuit form of the computation: a z rotation then an x rotation of `|+>`.
pub fn circuit_oracle(phi: f64, theta: f64) -> Ket {
    let (z_angle, x_angle) = chain_angles(phi, theta);
    let u = &catalog::x_rotation(x_angle) * &catalog::z_rotation(z_angle);
    u.apply(&catalog::plus()).expect("unitary on a normalized ket")
}

/// Pockels-cell triggers for one outcome; the correction is
/// `(X if pc1) (Z if pc2)`. The second cell sits between HWPs that turn its
/// X action into Z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcTrigger {
    pub pc1: bool,
    pub pc2: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedforwardTable {
    pub entries: Vec<(OutcomeLabel, PcTrigger)>,
}

impl FeedforwardTable {
    /// PC1 fires on RT or RR, PC2 on TT or RR.
    pub fn standard() -> Self {
        let entries = OutcomeLabel::ALL
            .iter()
            .map(|&l| {
                let pc1 = matches!(l, OutcomeLabel::RT | OutcomeLabel::RR);
                let pc2 = matches!(l, OutcomeLabel::TT | OutcomeLabel::RR);
                (l, PcTrigger { pc1, pc2 })
            })
            .collect();
        FeedforwardTable { entries }
    }

    pub fn trigger(&self, label: OutcomeLabel) -> Result<PcTrigger> {
        self.entries
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, t)| *t)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn correction(&self, label: OutcomeLabel) -> Result<Operator> {
        let t = self.trigger(label)?;
        Ok(PauliFrame { x: t.pc1, z: t.pc2 }.operator())
    }
}

/// `sigma_n in {Z, 1, X, XZ}` in the experimental index order.
pub fn feedforward_sigma(label: OutcomeLabel) -> Operator {
    let x = Gate::X.matrix();
    let z = Gate::Z.matrix();
    match label {
        OutcomeLabel::TT => z,
        OutcomeLabel::TR => Operator::identity(2),
        OutcomeLabel::RT => x,
        OutcomeLabel::RR => &x * &z,
    }
}

fn require_two_qubits(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: rho.dim() });
    }
    Ok(())
}

/// POVM on qubit 1, then the feedforward correction on qubit 2.
pub fn run_povm_with(input: &DensityMatrix, povm: &Povm, table: &FeedforwardTable) -> Result<Vec<BranchResult>> {
    require_two_qubits(input)?;
    measure(input, povm, 1)?
        .into_iter()
        .map(|b| {
            let corrected_output = match &b.post_state {
                Some(post) => {
                    let reduced = DensityMatrix::normalized(post.operator().partial_trace(1)?)?;
                    Some(reduced.conjugate_by(&table.correction(b.label)?))
                }
                None => None,
            };
            Ok(BranchResult { record: BranchRecord::Povm(b.label), probability: b.probability, corrected_output })
        })
        .collect()
}

/// Two-photon computation: the experimental POVM at `(phi, theta)` on photon 1
/// of `input` with Pockels-cell feedforward on photon 2.
pub fn run_povm_mbqc(input: &DensityMatrix, phi: f64, theta: f64) -> Result<Vec<BranchResult>> {
    run_povm_with(input, &povm::povm_experimental(phi, theta), &FeedforwardTable::standard())
}

/// `sum_n sigma_n Tr_1[(E_n x 1) rho (E_n x 1)^dagger] sigma_n^dagger` before
/// normalization. With trace-1/2 rank-1 elements the trace is 1/2.
pub fn expected_output_unnormalized(rho_in: &DensityMatrix, phi: f64, theta: f64) -> Result<Operator> {
    require_two_qubits(rho_in)?;
    let p = povm::povm_experimental(phi, theta);
    let mut acc = Operator::zeros(2);
    for (label, element) in p.iter() {
        let reduced = sandwich_update(rho_in, element, 1)?.partial_trace(1)?;
        acc = &acc + &feedforward_sigma(label).sandwich(&reduced);
    }
    Ok(acc)
}

/// Output of a perfect POVM and feedforward acting on `rho_in`, unit trace.
pub fn expected_output(rho_in: &DensityMatrix, phi: f64, theta: f64) -> Result<DensityMatrix> {
    DensityMatrix::normalized(expected_output_unnormalized(rho_in, phi, theta)?.hermitian_part())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResourceForm {
    Cluster,
    PhiPlus,
}

pub fn ideal_resource(form: ResourceForm) -> DensityMatrix {
    let phi_plus = DensityMatrix::from_ket(&catalog::phi_plus());
    match form {
        ResourceForm::PhiPlus => phi_plus,
        ResourceForm::Cluster => hadamard_frame_adapter(&phi_plus).expect("two-qubit state"),
    }
}

/// `H` on qubit 1: swaps between the Bell-pair and two-qubit-cluster forms.
pub fn hadamard_frame_adapter(rho: &DensityMatrix) -> Result<DensityMatrix> {
    require_two_qubits(rho)?;
    let h1 = Operator::embed(&Gate::H.matrix(), 1, 2)?;
    Ok(rho.conjugate_by(&h1))
}

/// The POVM that realizes setting `(phi, theta)` on the given resource form.
pub fn frame_povm(form: ResourceForm, phi: f64, theta: f64) -> Povm {
    let p = povm::povm_experimental(phi, theta);
    match form {
        ResourceForm::PhiPlus => p,
        ResourceForm::Cluster => p.conjugated(&Gate::H.matrix()),
    }
}

/// Outcome pairs `(a, b)` of the three-qubit chain (ancilla, then qubit S1)
/// matched to the two-photon POVM outcome they reproduce.
pub const CHAIN_BRANCH_LABELS: [((bool, bool), OutcomeLabel); 4] = [
    ((false, false), OutcomeLabel::TR),
    ((true, false), OutcomeLabel::TT),
    ((false, true), OutcomeLabel::RT),
    ((true, true), OutcomeLabel::RR),
];

pub fn chain_branch_label(a: bool, b: bool) -> OutcomeLabel {
    CHAIN_BRANCH_LABELS.iter().find(|(k, _)| *k == (a, b)).map(|(_, l)| *l).expect("all four pairs listed")
}

/// Agreement of the circuit, the three-qubit projective chain and the
/// two-photon POVM computation with `|psi(phi, theta)>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleCheck {
    pub phi: f64,
    pub theta: f64,
    pub circuit_fidelity: f64,
    pub projective_min_fidelity: f64,
    pub povm_min_fidelity: f64,
    /// Largest difference between paired chain and POVM branch probabilities.
    pub paired_probability_gap: f64,
    /// Largest entrywise difference between paired corrected outputs.
    pub paired_output_gap: f64,
}

impl TriangleCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.circuit_fidelity > 1.0 - tol
            && self.projective_min_fidelity > 1.0 - tol
            && self.povm_min_fidelity > 1.0 - tol
            && self.paired_probability_gap < tol
            && self.paired_output_gap < tol
    }
}

fn min_branch_fidelity(branches: &[BranchResult], target: &Ket) -> f64 {
    branches
        .iter()
        .filter_map(|b| b.corrected_output.as_ref())
        .map(|out| out.operator().expectation(target).re)
        .fold(f64::INFINITY, f64::min)
}

pub fn check_oracle_triangle(phi: f64, theta: f64) -> Result<TriangleCheck> {
    let target = catalog::psi(phi, theta);
    let circuit_fidelity = circuit_oracle(phi, theta).overlap(&target);

    let chain = build_cluster(&ClusterSpec::linear(3))?;
    let projective = run_projective_mbqc(&chain, &chain_plan(phi, theta))?;
    let povm_branches = run_povm_mbqc(&ideal_resource(ResourceForm::PhiPlus), phi, theta)?;

    let mut paired_probability_gap: f64 = 0.0;
    let mut paired_output_gap: f64 = 0.0;
    for b in &projective {
        let BranchRecord::Projective(outcomes) = &b.record else { unreachable!() };
        let label = chain_branch_label(outcomes[0], outcomes[1]);
        let partner =
            povm_branches.iter().find(|p| p.record == BranchRecord::Povm(label)).expect("every label has a branch");
        paired_probability_gap = paired_probability_gap.max((b.probability - partner.probability).abs());
        if let (Some(x), Some(y)) = (&b.corrected_output, &partner.corrected_output) {
            paired_output_gap = paired_output_gap.max(x.operator().max_abs_diff(y.operator()));
        }
    }
    Ok(TriangleCheck {
        phi,
        theta,
        circuit_fidelity,
        projective_min_fidelity: min_branch_fidelity(&projective, &target),
        povm_min_fidelity: min_branch_fidelity(&povm_branches, &target),
        paired_probability_gap,
        paired_output_gap,
    })
}
