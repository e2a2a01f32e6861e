//! Dense statevector simulation of small qubit registers.
//!
//! Only the two kernels the circuits need are implemented: RY rotations and
//! CNOT entanglers, both as stride-indexed amplitude-pair updates (no gate
//! matrices are materialized). Measurement is limited to Pauli-Z readout,
//! per qubit or as the full tensor product.
//!
//! Convention: basis index bit `i` is qubit `i`'s state, qubit 0 least
//! significant.

use num_complex::Complex64;

/// Hard cap on register size; 2^24 amplitudes is already 256 MiB.
pub const MAX_QUBITS: usize = 24;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum QsimError {
    #[error("qubit count {0} outside supported range 1..={MAX_QUBITS}")]
    QubitCountOutOfRange(usize),
    #[error("qubit index {index} out of range for {n} qubits")]
    QubitOutOfRange { index: usize, n: usize },
    #[error("control and target must differ (both {0})")]
    ControlTargetCollision(usize),
    #[error("amplitude vector length {0} is not a power of two in range")]
    InvalidAmplitudes(usize),
}

/// State |ψ⟩ of an `n`-qubit register as 2^n complex amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0…0⟩ on `n` qubits.
    pub fn zero(n: usize) -> Result<Self, QsimError> {
        if n == 0 || n > MAX_QUBITS {
            return Err(QsimError::QubitCountOutOfRange(n));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    /// Resets to |0…0⟩ without reallocating.
    pub fn reset_zero(&mut self) {
        self.amps.fill(Complex64::new(0.0, 0.0));
        self.amps[0] = Complex64::new(1.0, 0.0);
    }

    /// Builds a state from explicit amplitudes (length must be 2^n).
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, QsimError> {
        let len = amps.len();
        if !len.is_power_of_two() || len < 2 || len > (1 << MAX_QUBITS) {
            return Err(QsimError::InvalidAmplitudes(len));
        }
        Ok(StateVector {
            n: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, index: usize) -> Result<(), QsimError> {
        if index >= self.n {
            return Err(QsimError::QubitOutOfRange { index, n: self.n });
        }
        Ok(())
    }

    /// Applies RY(θ) = [[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]] on `qubit`,
    /// in place (single-owner mutation).
    pub fn ry(&mut self, qubit: usize, angle: f64) -> Result<(), QsimError> {
        self.check_qubit(qubit)?;
        let (s, c) = (angle / 2.0).sin_cos();
        let mask = 1usize << qubit;
        let len = self.amps.len();
        let mut base = 0;
        while base < len {
            for off in 0..mask {
                let i0 = base + off;
                let i1 = i0 | mask;
                let a0 = self.amps[i0];
                let a1 = self.amps[i1];
                self.amps[i0] = c * a0 - s * a1;
                self.amps[i1] = s * a0 + c * a1;
            }
            base += mask << 1;
        }
        Ok(())
    }

    /// Applies CNOT with the given control and target, in place.
    pub fn cnot(&mut self, control: usize, target: usize) -> Result<(), QsimError> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(QsimError::ControlTargetCollision(control));
        }
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for k in 0..self.amps.len() {
            if k & cmask != 0 && k & tmask == 0 {
                self.amps.swap(k, k | tmask);
            }
        }
        Ok(())
    }

    /// ⟨Z⊗…⊗Z⟩ over all qubits: Σ_k (−1)^popcount(k) |a_k|², in [−1, 1].
    pub fn expect_z_all(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let sign = if k.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                sign * a.norm_sqr()
            })
            .sum()
    }

    /// ⟨Z⟩ on a single qubit, in [−1, 1].
    pub fn expect_z(&self, qubit: usize) -> Result<f64, QsimError> {
        self.check_qubit(qubit)?;
        let mask = 1usize << qubit;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let sign = if k & mask == 0 { 1.0 } else { -1.0 };
                sign * a.norm_sqr()
            })
            .sum())
    }
}
