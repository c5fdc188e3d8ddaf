"""Three-body Hamiltonian and effective qubit-qubit couplings, static and modulated.

Each mode keeps its lowest three levels, so the full Hilbert space is
27-dimensional with basis |n1 nc n2> and index 9*n1 + 3*nc + n2.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.special import jv

from .fluxcontrol import FluxPulse
from .spectrum import DeviceParams, TransmonSpec, transition_frequency

LEVELS = 3
DIM = LEVELS**3

# Index of |n1 nc n2| in the product basis.
def basis_index(n1: int, nc: int, n2: int) -> int:
    return 9 * n1 + 3 * nc + n2


BASIS_LABELS = tuple(f"|{n1}{nc}{n2}>" for n1 in range(3)
                     for nc in range(3) for n2 in range(3))

# Two-qubit computational subspace |q1 q2> with the coupler in |0>,
# ordered 00, 01, 10, 11.
COMPUTATIONAL_INDICES = (basis_index(0, 0, 0), basis_index(0, 0, 1),
                         basis_index(1, 0, 0), basis_index(1, 0, 1))

_SIGMA = np.diag([1.0, np.sqrt(2.0)], k=1)      # lowering operator, 3 levels
_SIGMA_X = _SIGMA + _SIGMA.T
_NUM = np.diag([0.0, 1.0, 2.0])
_P2 = np.diag([0.0, 0.0, 1.0])
_EYE = np.eye(3)


def _kron3(a, b, c):
    return np.kron(a, np.kron(b, c))


def _coupling_ops(rwa: bool):
    if rwa:
        pair_1c = _kron3_pair(_SIGMA.T, _SIGMA, 0, 1) + _kron3_pair(_SIGMA, _SIGMA.T, 0, 1)
        pair_c2 = _kron3_pair(_SIGMA.T, _SIGMA, 1, 2) + _kron3_pair(_SIGMA, _SIGMA.T, 1, 2)
        pair_12 = _kron3_pair(_SIGMA.T, _SIGMA, 0, 2) + _kron3_pair(_SIGMA, _SIGMA.T, 0, 2)
    else:
        pair_1c = _kron3_pair(_SIGMA_X, _SIGMA_X, 0, 1)
        pair_c2 = _kron3_pair(_SIGMA_X, _SIGMA_X, 1, 2)
        pair_12 = _kron3_pair(_SIGMA_X, _SIGMA_X, 0, 2)
    return pair_1c, pair_c2, pair_12


def _kron3_pair(op_a, op_b, slot_a, slot_b):
    ops = [_EYE, _EYE, _EYE]
    ops[slot_a] = op_a
    ops[slot_b] = op_b
    return _kron3(*ops)


# Structure operators, built once.  Diagonal parts are stored as vectors.
NUM_1 = np.real(np.diag(_kron3(_NUM, _EYE, _EYE)))
NUM_C = np.real(np.diag(_kron3(_EYE, _NUM, _EYE)))
NUM_2 = np.real(np.diag(_kron3(_EYE, _EYE, _NUM)))
P2_1 = np.real(np.diag(_kron3(_P2, _EYE, _EYE)))
P2_C = np.real(np.diag(_kron3(_EYE, _P2, _EYE)))
P2_2 = np.real(np.diag(_kron3(_EYE, _EYE, _P2)))
XX_1C, XX_C2, XX_12 = _coupling_ops(rwa=False)
XX_1C_RWA, XX_C2_RWA, XX_12_RWA = _coupling_ops(rwa=True)

TOTAL_EXCITATION = NUM_1 + NUM_C + NUM_2


@dataclass(frozen=True)
class ThreeBodyHamiltonian:
    """Dense 27x27 Hamiltonian in GHz with its basis-ordering descriptor."""

    matrix: np.ndarray
    basis: tuple = BASIS_LABELS
    rwa: bool = False

    def __post_init__(self):
        h = self.matrix
        if h.shape != (DIM, DIM):
            raise ValueError(f"expected a {DIM}x{DIM} matrix")
        if np.max(np.abs(h - h.conj().T)) > 1e-12:
            raise ValueError("Hamiltonian is not Hermitian")


def hamiltonian_diagonal(f1, fc, f2, eta1, etac, eta2) -> np.ndarray:
    """Diagonal (bare) part of the three-body Hamiltonian as a length-27 vector."""
    return (f1 * NUM_1 + fc * NUM_C + f2 * NUM_2
            - eta1 * P2_1 - etac * P2_C - eta2 * P2_2)


def build_hamiltonian(p: DeviceParams, rwa: bool = False) -> ThreeBodyHamiltonian:
    """Assemble the static three-body Hamiltonian from device parameters.

    With rwa=True the counter-rotating parts of the charge-charge couplings
    are dropped and the total excitation number is conserved.
    """
    diag = hamiltonian_diagonal(p.f1, p.fc, p.f2, p.eta1, p.etac, p.eta2)
    if rwa:
        pair_1c, pair_c2, pair_12 = XX_1C_RWA, XX_C2_RWA, XX_12_RWA
    else:
        pair_1c, pair_c2, pair_12 = XX_1C, XX_C2, XX_12
    h = np.diag(diag) + p.g1c * pair_1c + p.g2c * pair_c2 + p.g12 * pair_12
    return ThreeBodyHamiltonian(matrix=h, rwa=rwa)


@dataclass(frozen=True)
class StaticEffective:
    """Dressed frequencies and effective couplings after coupler elimination (GHz)."""

    f01_1: float
    f01_2: float
    f02_1: float
    f02_2: float
    g01: float
    g02: float
    g20: float
    delta1: float
    delta2: float
    sigma1: float
    sigma2: float


_RESONANCE_TOL = 1e-6  # GHz


def static_couplings(p: DeviceParams,
                     include_counter_rotating: bool = True) -> StaticEffective:
    """Second-order effective couplings with the coupler adiabatically eliminated.

    include_counter_rotating=False drops all 1/Sigma terms, which is the
    variant used for coupler-flux sweeps of the zero-coupling point.
    """
    d1 = p.fc - p.f1
    d2 = p.fc - p.f2
    s1 = p.fc + p.f1
    s2 = p.fc + p.f2
    denominators = [d1, d2, d1 + p.eta1, d2 + p.eta2,
                    s1, s2, s1 - p.eta1, s2 - p.eta2]
    if min(abs(x) for x in denominators) < _RESONANCE_TOL:
        raise ValueError("coupler resonance; dispersive elimination invalid")
    if max(abs(p.g1c / d1), abs(p.g2c / d2)) > 0.3:
        warnings.warn("qubit-coupler system is far from dispersive "
                      f"(g/Delta = {abs(p.g1c / d1):.2f}, {abs(p.g2c / d2):.2f})")

    cr = 1.0 if include_counter_rotating else 0.0
    gg = p.g1c * p.g2c
    g01 = p.g12 - 0.5 * gg * (1.0 / d1 + 1.0 / d2 + cr * (1.0 / s1 + 1.0 / s2))
    g02 = np.sqrt(2.0) * p.g12 - gg / np.sqrt(2.0) * (
        1.0 / d1 + 1.0 / (d2 + p.eta2) + cr * (1.0 / s1 + 1.0 / (s2 - p.eta2)))
    g20 = np.sqrt(2.0) * p.g12 - gg / np.sqrt(2.0) * (
        1.0 / (d1 + p.eta1) + 1.0 / d2 + cr * (1.0 / (s1 - p.eta1) + 1.0 / s2))

    f01_1 = p.f1 + p.g1c**2 / d1 + cr * p.g1c**2 / s1
    f01_2 = p.f2 + p.g2c**2 / d2 + cr * p.g2c**2 / s2
    f02_1 = 2 * p.f1 - p.eta1 + 2 * p.g1c**2 / (d1 + p.eta1) \
        + cr * 2 * p.g1c**2 / (s1 - p.eta1)
    f02_2 = 2 * p.f2 - p.eta2 + 2 * p.g2c**2 / (d2 + p.eta2) \
        + cr * 2 * p.g2c**2 / (s2 - p.eta2)
    return StaticEffective(f01_1=f01_1, f01_2=f01_2, f02_1=f02_1, f02_2=f02_2,
                           g01=g01, g02=g02, g20=g20,
                           delta1=d1, delta2=d2, sigma1=s1, sigma2=s2)


def exact_g01(p: DeviceParams, window: float = 0.05, rwa: bool = False) -> float:
    """Half the minimum single-excitation avoided-crossing gap, by eigensolver.

    Sweeps the bare qubit-2 frequency through qubit 1 and tracks the gap
    between the two qubit-like dressed eigenstates.  Serves as the oracle for
    static_couplings g01.
    """
    idx_10 = basis_index(1, 0, 0)
    idx_01 = basis_index(0, 0, 1)

    def gap(f2):
        h = build_hamiltonian(replace(p, f2=f2), rwa=rwa).matrix
        vals, vecs = np.linalg.eigh(h)
        weight = np.abs(vecs[idx_10, :])**2 + np.abs(vecs[idx_01, :])**2
        a, b = np.argsort(weight)[-2:]
        return abs(vals[a] - vals[b])

    grid = np.linspace(p.f1 - window, p.f1 + window, 81)
    gaps = np.array([gap(f) for f in grid])
    k = int(np.argmin(gaps))
    if k in (0, len(grid) - 1):
        raise ValueError("no avoided crossing found in sweep window")
    from scipy.optimize import minimize_scalar
    res = minimize_scalar(gap, bounds=(grid[k - 1], grid[k + 1]), method="bounded",
                          options={"xatol": 1e-12})
    return 0.5 * float(res.fun)


@dataclass(frozen=True)
class ModulatedCouplings:
    """Per-sideband weights and effective couplings under flux modulation.

    Index n runs over [-n_max, n_max]; at a flux sweet spot the qubit
    frequency oscillates at twice the modulation frequency, so sideband n
    sits at a shift of 2*n*mod_freq (spacing = 2), otherwise n*mod_freq.
    The weights eps are the numeric Fourier coefficients (authoritative);
    eps_bessel is the small-amplitude closed form J_n.
    """

    n: np.ndarray
    eps: np.ndarray          # complex
    eps_bessel: np.ndarray   # real
    g01: np.ndarray          # complex, GHz
    g02: np.ndarray
    g20: np.ndarray
    f2_avg: float            # GHz
    f2_exc: float            # GHz
    mod_freq: float          # GHz
    spacing: int

    def sideband(self, n: int) -> dict:
        k = int(n) + (len(self.n) - 1) // 2
        if not 0 <= k < len(self.n):
            raise IndexError(f"sideband {n} outside computed range")
        return {"n": int(n), "eps": self.eps[k], "g01": self.g01[k],
                "g02": self.g02[k], "g20": self.g20[k]}


def _is_sweet_spot(phi_dc: float) -> bool:
    # Band extrema sit at integer and half-integer flux quanta.
    r = phi_dc % 0.5
    return min(r, 0.5 - r) < 1e-9


_FOURIER_SAMPLES = 4096


def _modulation_samples(q2_spec: TransmonSpec, pulse: FluxPulse):
    """Qubit-2 frequency over one flat-top modulation period, densely sampled."""
    if pulse.mod_freq <= 0:
        raise ValueError("modulation frequency must be > 0")
    period = 1.0 / pulse.mod_freq
    t = np.linspace(0.0, period, _FOURIER_SAMPLES + 1)
    flux = pulse.phi_dc + pulse.amplitude * np.sin(
        2.0 * np.pi * pulse.mod_freq * t + pulse.phase)
    f2 = np.asarray(transition_frequency(q2_spec, 2.0 * np.pi * flux))
    return t, f2


def average_and_excursion(q2_spec: TransmonSpec, pulse: FluxPulse) -> tuple:
    """(f2_avg, f2_exc) in GHz over one modulation period of the flat top.

    f2_avg is the time average of the instantaneous qubit frequency; f2_exc
    is the amplitude of its component at twice the modulation frequency,
    which dominates for sweet-spot modulation.
    """
    if pulse.mod_freq <= 0 or pulse.amplitude == 0.0:
        flux_dc = pulse.phi_dc if pulse.mod_freq > 0 else pulse.phi_dc + pulse.amplitude
        f_dc = float(transition_frequency(q2_spec, 2.0 * np.pi * flux_dc))
        return f_dc, 0.0
    t, f2 = _modulation_samples(q2_spec, pulse)
    period = t[-1]
    f_avg = float(trapezoid(f2, t) / period)
    coeffs = np.fft.fft(f2[:-1]) / _FOURIER_SAMPLES
    f_exc = 2.0 * float(np.abs(coeffs[2]))
    return f_avg, f_exc


def numeric_fourier_weights(q2_spec: TransmonSpec, pulse: FluxPulse,
                            n_max: int = 5) -> tuple:
    """Sideband weights eps_n from the Fourier expansion of the phase factor.

    Integrates the accumulated phase of the modulated qubit over one period
    and projects exp(-i theta(t)) onto harmonics spaced by spacing*mod_freq.
    Returns (n, eps, spacing) with eps complex.
    """
    n = np.arange(-n_max, n_max + 1)
    if pulse.amplitude == 0.0:
        eps = np.zeros(len(n), dtype=complex)
        eps[n_max] = 1.0
        return n, eps, _spacing_for(pulse)
    t, f2 = _modulation_samples(q2_spec, pulse)
    period = t[-1]
    f_avg = trapezoid(f2, t) / period
    theta = 2.0 * np.pi * cumulative_trapezoid(f2 - f_avg, t, initial=0.0)
    phase_factor = np.exp(-1j * theta[:-1])
    harmonics = np.fft.ifft(phase_factor)  # harmonic m at exp(+i m wp t)
    spacing = _spacing_for(pulse)
    eps = harmonics[(n * spacing) % _FOURIER_SAMPLES]
    return n, eps, spacing


def _spacing_for(pulse: FluxPulse) -> int:
    return 2 if _is_sweet_spot(pulse.phi_dc) else 1


def modulated_couplings(p: DeviceParams, pulse: FluxPulse, q2_spec: TransmonSpec,
                        n_max: int = 5,
                        include_counter_rotating: bool = True) -> ModulatedCouplings:
    """Effective couplings g01_n, g02_n, g20_n for sidebands n in [-n_max, n_max].

    Detunings use the average modulated frequency, Delta2 = fc - f2_avg; each
    sideband shifts the qubit-2 denominators by n*spacing*mod_freq.  Raises if
    a retained sideband comes too close to the coupler resonance.
    """
    f_avg, f_exc = average_and_excursion(q2_spec, pulse)
    n, eps, spacing = numeric_fourier_weights(q2_spec, pulse, n_max)
    eps_bessel = jv(n, f_exc / (2.0 * pulse.mod_freq)) if pulse.mod_freq > 0 \
        else (n == 0).astype(float)

    d1 = p.fc - p.f1
    s1 = p.fc + p.f1
    d2 = p.fc - f_avg
    s2 = p.fc + f_avg
    shift = n * spacing * pulse.mod_freq
    cr = 1.0 if include_counter_rotating else 0.0

    guard = 1e-3  # GHz
    for name, dens in (("g01", d2 - shift), ("g02", d2 + p.eta2 - shift),
                       ("g20", d2 - shift)):
        bad = np.abs(dens) < guard
        if np.any(bad):
            worst = n[bad][np.argmin(np.abs(dens[bad]))]
            raise ValueError(
                f"sideband n={int(worst)} of {name} is resonant with the coupler "
                f"(|detuning| < {guard * 1e3:.0f} MHz)")

    gg = p.g1c * p.g2c
    g01 = eps * p.g12 - 0.5 * gg * eps * (
        1.0 / d1 + 1.0 / (d2 - shift) + cr * (1.0 / s1 + 1.0 / (s2 + shift)))
    g02 = np.sqrt(2.0) * eps * p.g12 - gg * eps / np.sqrt(2.0) * (
        1.0 / d1 + 1.0 / (d2 + p.eta2 - shift)
        + cr * (1.0 / s1 + 1.0 / (s2 - p.eta2 + shift)))
    g20 = np.sqrt(2.0) * eps * p.g12 - gg * eps / np.sqrt(2.0) * (
        1.0 / (d1 + p.eta1) + 1.0 / (d2 - shift)
        + cr * (1.0 / (s1 - p.eta1) + 1.0 / (s2 + shift)))

    return ModulatedCouplings(n=n, eps=eps, eps_bessel=np.asarray(eps_bessel),
                              g01=g01, g02=g02, g20=g20,
                              f2_avg=f_avg, f2_exc=f_exc,
                              mod_freq=pulse.mod_freq, spacing=spacing)
