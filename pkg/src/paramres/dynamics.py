"""Time-domain propagation of the three-body system under flux pulses.

The integrator is a piecewise-constant midpoint rule: the Hamiltonian is
sampled at step midpoints and each step applies exp(-i*2*pi*H(t_mid)*dt)
through an exact eigendecomposition, so every step is exactly unitary and
the global error is second order in dt.  Propagation happens in the lab
frame; single-qubit phases are stripped afterwards (see tomography).
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .circuit import squid_energy
from .effective import (DIM, NUM_1, NUM_2, NUM_C, P2_1, P2_2, P2_C,
                        TOTAL_EXCITATION, XX_12, XX_12_RWA, XX_1C, XX_1C_RWA,
                        XX_C2, XX_C2_RWA, basis_index)
from .fluxcontrol import FluxPulse, instantaneous_flux
from .spectrum import DeviceParams, transition_frequency

UNITARITY_TOL = 1e-8

# indices of the n1 + nc + n2 = 1 block, ascending: (|001>, |010>, |100>)
SINGLE_EXCITATION = tuple(int(i) for i in np.flatnonzero(TOTAL_EXCITATION == 1))


@dataclass(frozen=True)
class Propagation:
    """Result of one time-domain propagation."""

    unitary: np.ndarray          # final U in the bare product basis
    dt: float                    # actual step size (ns)
    n_steps: int
    times: np.ndarray            # sample times (ns), empty unless sampling requested
    trajectory: np.ndarray       # sampled states (n_times x dim), empty likewise
    unitary_times: np.ndarray    # snapshot times (ns), empty unless requested
    unitaries: np.ndarray        # propagator snapshots (n x dim x dim), empty likewise
    subspace: tuple              # basis indices propagated (full space by default)
    unitarity_defect: float

    def state_populations(self) -> np.ndarray:
        """|amplitude|^2 of the sampled trajectory."""
        return np.abs(self.trajectory) ** 2


def _ej_ratio_quarter(squid, phi_dc, flux_t):
    """(EJ(t)/EJ(dc))^(1/4) for a flux trace in units of the flux quantum."""
    ej_dc, _ = squid_energy(squid, 2.0 * math.pi * phi_dc)
    ej_t, _ = squid_energy(squid, 2.0 * math.pi * np.asarray(flux_t))
    if ej_dc <= 0 or np.any(np.asarray(ej_t) <= 0):
        raise ValueError("vanishing Josephson energy along the pulse")
    return (np.asarray(ej_t) / ej_dc) ** 0.25


def _parameter_series(p, q2_pulse, coupler_pulse, specs, t_mid, flux2=None):
    """Midpoint samples of the time-dependent model parameters.

    specs is (q2_spec, coupler_spec).  f1 and the anharmonicities stay at
    their DC values.  The pulses contribute deviations from the DC point:
    f2(t) = p.f2 + [band(flux(t)) - band(flux_dc)], so p remains the exact
    operating point at zero pulse amplitude, and the couplings scale with
    EJ^(1/4) of the modulated elements relative to their DC values.
    """
    q2_spec, coupler_spec = specs
    flux2 = instantaneous_flux(q2_pulse, t_mid) if flux2 is None else flux2
    f2_band = transition_frequency(q2_spec, 2.0 * math.pi * np.asarray(flux2))
    f2_dc = transition_frequency(q2_spec, 2.0 * math.pi * q2_pulse.phi_dc)
    f2 = p.f2 + (f2_band - f2_dc)
    r2 = _ej_ratio_quarter(q2_spec.squid, q2_pulse.phi_dc, flux2)
    if coupler_pulse is not None and coupler_pulse.amplitude != 0.0:
        fluxc = instantaneous_flux(coupler_pulse, t_mid)
        fc_band = transition_frequency(coupler_spec, 2.0 * math.pi * np.asarray(fluxc))
        fc_dc = transition_frequency(coupler_spec, 2.0 * math.pi * coupler_pulse.phi_dc)
        fc = p.fc + (fc_band - fc_dc)
        rc = _ej_ratio_quarter(coupler_spec.squid, coupler_pulse.phi_dc, fluxc)
    else:
        fc = np.full_like(np.asarray(f2), p.fc)
        rc = np.ones_like(np.asarray(f2))
    return {
        "f2": np.atleast_1d(f2),
        "fc": np.atleast_1d(fc),
        "g1c": p.g1c * np.atleast_1d(rc),
        "g2c": p.g2c * np.atleast_1d(r2) * np.atleast_1d(rc),
        "g12": p.g12 * np.atleast_1d(r2),
    }


def _is_static(pulse) -> bool:
    return pulse is None or pulse.amplitude == 0.0 or (
        pulse.mod_freq == 0.0 and pulse.ramp == 0.0)


def default_dt(p: DeviceParams) -> float:
    """Step size resolving the fastest transition, 1/(40 * max frequency)."""
    return 1.0 / (40.0 * max(p.f1, p.f2, p.fc))


def propagate(p: DeviceParams, q2_pulse: FluxPulse, coupler_pulse, specs,
              dt=None, rwa=False, initial_state=None, n_samples=0,
              subspace=None, unitary_times=None) -> Propagation:
    """Propagate over the q2 pulse window and return the final unitary.

    p holds the model parameters at the DC biases of the pulses (see
    calibration.operating_point).  specs is (q2_spec, coupler_spec), used to
    convert instantaneous fluxes to frequencies and coupling scale factors.
    With n_samples > 0 and an initial_state (bare basis index or vector),
    the state trajectory is recorded at evenly spaced times, which gives a
    chevron duration axis from a single propagation.

    unitary_times requests snapshots of the running propagator, taken at the
    nearest step boundaries (the actual times come back in unitary_times).
    For a ramp-free flat-top pulse the steps of a truncated pulse coincide
    with the leading steps of the full one, so the snapshot at time t is the
    final unitary of the same pulse with duration t; a duration scan then
    costs one propagation instead of one per duration.

    subspace restricts the propagation to a tuple of bare basis indices;
    combined with rwa=True this is exact for dynamics that start inside one
    excitation block (the rotating-wave Hamiltonian conserves total
    excitation number), and much faster than the full 27-dim stepping.
    """
    duration = q2_pulse.duration
    if duration <= 0:
        raise ValueError("pulse duration must be > 0")
    if coupler_pulse is not None and coupler_pulse.duration != duration:
        raise ValueError("qubit and coupler pulses must share one duration")
    if dt is None:
        dt = default_dt(p)

    # Snap dt to an integer fraction of the modulation period: flat-top steps
    # then repeat exactly period over period, so their eigendecompositions can
    # be cached (a trailing partial step absorbs the incommensurate remainder).
    period = (1.0 / q2_pulse.mod_freq
              if q2_pulse.mod_freq > 0 and q2_pulse.amplitude != 0.0 else 0.0)
    if 0.0 < period < duration:
        m_period = math.ceil(period / dt)
        dt = period / m_period
        n_full = int(duration / dt + 1e-9)
        step_dt = np.full(n_full, dt)
        rem = duration - n_full * dt
        # Durations produced by the snapping itself sit within summation
        # noise of an exact multiple; only keep remainders that are real.
        if rem > 1e-4 * dt:
            step_dt = np.append(step_dt, rem)
    else:
        m_period = 0
        n_full = max(1, math.ceil(duration / dt))
        dt = duration / n_full
        step_dt = np.full(n_full, dt)
    n_steps = len(step_dt)
    edges = np.concatenate(([0.0], np.cumsum(step_dt)))
    edges[-1] = duration
    t_mid = np.clip(0.5 * (edges[:-1] + edges[1:]), 0.0, duration)

    flux2_tiled = None
    if m_period > 0:
        flux2_tiled = np.asarray(instantaneous_flux(q2_pulse, t_mid),
                                 dtype=float).copy()
        j = np.arange(m_period)
        pattern = q2_pulse.phi_dc + q2_pulse.amplitude * np.sin(
            2.0 * math.pi * q2_pulse.mod_freq * (j + 0.5) * dt + q2_pulse.phase)
        k = np.arange(n_steps)
        flat = ((edges[:-1] >= q2_pulse.ramp)
                & (edges[1:] <= duration - q2_pulse.ramp) & (k < n_full))
        flux2_tiled[flat] = pattern[k[flat] % m_period]

    idx = tuple(range(DIM)) if subspace is None else tuple(subspace)
    sub = np.asarray(idx, dtype=int)
    dim = len(idx)
    if rwa:
        xx_1c, xx_c2, xx_12 = (m[np.ix_(sub, sub)] for m in
                               (XX_1C_RWA, XX_C2_RWA, XX_12_RWA))
    else:
        if subspace is not None:
            raise ValueError("subspace restriction is only exact with rwa=True")
        xx_1c, xx_c2, xx_12 = XX_1C, XX_C2, XX_12
    num1, numc, num2 = NUM_1[sub], NUM_C[sub], NUM_2[sub]
    p21, p2c, p22 = P2_1[sub], P2_C[sub], P2_2[sub]
    diag_const = p.f1 * num1 - p.eta1 * p21 - p.etac * p2c - p.eta2 * p22

    psi = None
    if initial_state is not None:
        psi = np.zeros(dim, dtype=complex)
        if np.isscalar(initial_state):
            psi[idx.index(int(initial_state))] = 1.0
        else:
            vec = np.asarray(initial_state, dtype=complex)
            psi[:] = vec[sub] if vec.size == DIM else vec

    sample_steps = np.array([], dtype=int)
    times = np.array([])
    trajectory = np.zeros((0, dim), dtype=complex)
    if n_samples > 0:
        if psi is None:
            raise ValueError("trajectory sampling requires an initial state")
        sample_steps = np.unique(np.linspace(1, n_steps, n_samples).round().astype(int))
        times = edges[sample_steps]
        trajectory = np.zeros((len(sample_steps), dim), dtype=complex)

    u_steps = np.array([], dtype=int)
    u_times = np.array([])
    unitaries = np.zeros((0, dim, dim), dtype=complex)
    want_u = (np.array([], dtype=float) if unitary_times is None
              else np.atleast_1d(np.asarray(unitary_times, dtype=float)))
    if want_u.size and (np.any(want_u <= 0.0) or np.any(want_u > duration + 1e-9)):
        raise ValueError("unitary sample times must lie in (0, duration]")

    series = _parameter_series(p, q2_pulse, coupler_pulse, specs, t_mid,
                               flux2=flux2_tiled)
    static = _is_static(q2_pulse) and _is_static(coupler_pulse)

    u = np.eye(dim, dtype=complex)
    if static:
        # constant Hamiltonian: one eigendecomposition, exact for any dt
        h = (series["g1c"][0] * xx_1c + series["g2c"][0] * xx_c2
             + series["g12"][0] * xx_12)
        h[np.diag_indices(dim)] += (diag_const + series["fc"][0] * numc
                                    + series["f2"][0] * num2)
        evals, vecs = np.linalg.eigh(h)
        u = (vecs * np.exp(-2j * math.pi * evals * duration)) @ vecs.conj().T
        if len(sample_steps):
            phases = np.exp(-2j * math.pi * np.outer(times, evals))
            trajectory = (phases * (vecs.conj().T @ psi)) @ vecs.T
        if want_u.size:
            u_times = np.unique(want_u)
            uph = np.exp(-2j * math.pi * np.outer(u_times, evals))
            unitaries = np.einsum("ak,tk,bk->tab", vecs, uph, vecs.conj())
    else:
        diag_series = (diag_const[None, :] + np.outer(series["fc"], numc)
                       + np.outer(series["f2"], num2))
        di = np.diag_indices(dim)
        if want_u.size:
            pos = np.searchsorted(edges, want_u).clip(1, n_steps)
            left = (want_u - edges[pos - 1]) < (edges[pos] - want_u)
            u_steps = np.unique(np.where(left, pos - 1, pos).clip(1, n_steps))
            u_times = edges[u_steps]
            unitaries = np.zeros((len(u_steps), dim, dim), dtype=complex)
        cache = {}
        k_sample = 0
        k_unitary = 0
        for k in range(n_steps):
            key = (series["f2"][k], series["fc"][k], series["g1c"][k],
                   series["g2c"][k], series["g12"][k], step_dt[k])
            step = cache.get(key)
            if step is None:
                h = (series["g1c"][k] * xx_1c + series["g2c"][k] * xx_c2
                     + series["g12"][k] * xx_12)
                h[di] += diag_series[k]
                evals, vecs = np.linalg.eigh(h)
                step = (vecs * np.exp(-2j * math.pi * evals
                                      * step_dt[k])) @ vecs.conj().T
                cache[key] = step
            u = step @ u
            if k_sample < len(sample_steps) and sample_steps[k_sample] == k + 1:
                trajectory[k_sample] = u @ psi
                k_sample += 1
            if k_unitary < len(u_steps) and u_steps[k_unitary] == k + 1:
                unitaries[k_unitary] = u
                k_unitary += 1

    defect = float(np.max(np.abs(u.conj().T @ u - np.eye(dim))))
    if defect > UNITARITY_TOL:
        raise ValueError(
            f"unitarity drift {defect:.2e} exceeds {UNITARITY_TOL}; reduce dt")
    return Propagation(unitary=u, dt=dt, n_steps=n_steps, times=times,
                       trajectory=trajectory, unitary_times=u_times,
                       unitaries=unitaries, subspace=idx,
                       unitarity_defect=defect)


@dataclass(frozen=True)
class ChevronMap:
    """Target-state population versus drive amplitude and duration."""

    amplitudes: np.ndarray       # q2 flux amplitudes (flux quanta)
    durations: np.ndarray        # ns
    populations: np.ndarray      # shape (n_amplitudes, n_durations)
    initial: str
    target: str


# initial label -> (bare initial index, bare target index,
#                   computational column pair for a dressed basis, target label)
_CHEVRON_STATES = {
    "10": (basis_index(1, 0, 0), basis_index(0, 0, 1), (2, 1), "01"),
    "11": (basis_index(1, 0, 1), basis_index(1, 0, 1), (3, 3), "11"),
}


def chevron(p: DeviceParams, specs, q2_pulse: FluxPulse, coupler_pulse,
            amplitudes, durations, initial="10", rwa=False, dt=None,
            basis=None) -> ChevronMap:
    """Population map versus q2 drive amplitude and pulse duration.

    q2_pulse acts as a template: its amplitude and duration are replaced by
    the grid values (one propagation per amplitude; the duration axis comes
    from trajectory samples).  From |10> the map records the |01> population
    (energy exchange); from |11> it records the |11> return population.

    With ``basis`` (a 27x4 isometry onto the dressed computational
    states, columns ordered 00, 01, 10, 11) the prepared and recorded
    states are the dressed ones, as a dispersive readout would see
    them; bare-state populations carry a percent-level micromotion
    wiggle from the static coupler admixture that masks the chevron
    structure near full transfer.
    """
    amplitudes = np.asarray(amplitudes, dtype=float)
    durations = np.asarray(durations, dtype=float)
    if amplitudes.size == 0 or durations.size == 0:
        raise ValueError("chevron grids must be nonempty")
    try:
        idx_init, idx_target, cols, target_label = _CHEVRON_STATES[initial]
    except KeyError:
        raise ValueError(f"initial state must be '10' or '11', got {initial!r}")
    state_init: np.ndarray | int
    if basis is not None:
        basis = np.asarray(basis, dtype=complex)
        if basis.shape != (DIM, 4):
            raise ValueError(f"basis must be a 27x4 isometry, got {basis.shape}")
        state_init = basis[:, cols[0]]
        bra_target = basis[:, cols[1]].conj()
    else:
        state_init = idx_init
    t_max = float(durations.max())
    n_dense = max(256, 4 * durations.size)
    pops = np.zeros((amplitudes.size, durations.size))
    for i, amp in enumerate(amplitudes):
        pulse = replace(q2_pulse, amplitude=float(amp), duration=t_max)
        cpulse = None if coupler_pulse is None else replace(coupler_pulse,
                                                            duration=t_max)
        prop = propagate(p, pulse, cpulse, specs, dt=dt, rwa=rwa,
                         initial_state=state_init, n_samples=n_dense)
        if basis is not None:
            dense = np.abs(prop.trajectory @ bra_target) ** 2
        else:
            dense = np.abs(prop.trajectory[:, prop.subspace.index(idx_target)]) ** 2
        pops[i] = np.interp(durations, prop.times, dense)
    return ChevronMap(amplitudes=amplitudes, durations=durations,
                      populations=pops, initial=initial, target=target_label)


@dataclass(frozen=True)
class ExchangeFit:
    """Decaying-cosine fit of an exchange oscillation."""

    g: float          # GHz; population oscillates at 2*g
    decay: float      # 1/ns
    phase: float      # radians
    amplitude: float
    offset: float
    residual: float   # rms of the fit residual


def fit_exchange(times, populations) -> ExchangeFit:
    """Fit A*exp(-gamma*t)*cos(2*pi*(2*g)*t + phi) + B to a population trace."""
    from scipy.optimize import least_squares

    t = np.asarray(times, dtype=float)
    y = np.asarray(populations, dtype=float)
    if t.size < 8:
        raise ValueError("need at least 8 samples to fit an oscillation")
    contrast = y.max() - y.min()
    if contrast < 1e-6:
        raise ValueError("no oscillation contrast in the population trace")

    # seed the frequency from the spectrum of the detrended, uniformly
    # resampled trace
    t_u = np.linspace(t[0], t[-1], t.size)
    y_u = np.interp(t_u, t, y)
    spec = np.abs(np.fft.rfft(y_u - y_u.mean()))
    freqs = np.fft.rfftfreq(t_u.size, t_u[1] - t_u[0])
    f0 = freqs[1 + int(np.argmax(spec[1:]))]

    def model(x, tt):
        a, gamma, f, phi, b = x
        return a * np.exp(-gamma * tt) * np.cos(2.0 * math.pi * f * tt + phi) + b

    x0 = [contrast / 2.0, 0.0, f0, 0.0, y.mean()]
    fit = least_squares(lambda x: model(x, t) - y, x0,
                        bounds=([0.0, -0.1, 0.0, -2 * math.pi, -1.0],
                                [2.0, 1.0, freqs[-1], 2 * math.pi, 2.0]))
    rms = float(np.sqrt(np.mean(fit.fun ** 2)))
    if not fit.success or rms > 0.25 * contrast:
        raise ValueError(f"exchange fit did not converge (residual rms {rms:.3g})")
    a, gamma, f, phi, b = fit.x
    return ExchangeFit(g=float(f / 2.0), decay=float(gamma), phase=float(phi),
                       amplitude=float(a), offset=float(b), residual=rms)


def coupling_vs_bias(device, phic_grid, phi1=0.0, n_periods=3.0,
                     n_samples=720, detuning_span=8e-4, n_detunings=9,
                     rwa=False):
    """Dynamically extracted |g01| versus coupler flux bias.

    For each coupler bias, q2 is flux-tuned so the dressed qubit
    frequencies coincide, then a bare q1 excitation is evolved at a small
    grid of q2 flux offsets spanning the crossing and each transferred
    population trace is fitted with a decaying cosine.  The chevron
    vertex, the slowest oscillation over the grid, runs at the exact
    level splitting 2*g.  Pulse durations scale with the expected swap
    period, so weakly coupled points get the longer traces they need.

    Returns (measured |g01| array, static-model g01 array).  The static
    prediction is evaluated at the same resonant operating point; with
    rwa=True the propagation keeps only the rotating-wave
    single-excitation block and the static model drops its
    counter-rotating corrections to match.
    """
    from scipy.optimize import brentq

    from .device import device_params
    from .effective import static_couplings

    phic_grid = np.asarray(phic_grid, dtype=float)
    specs = (device.q2, device.coupler)
    offsets = np.linspace(-0.5, 0.5, n_detunings) * detuning_span
    g_dyn = np.zeros(phic_grid.size)
    g_stat = np.zeros(phic_grid.size)
    for i, phic in enumerate(phic_grid):
        def dressed_mismatch(phi2):
            st = static_couplings(
                device_params(device, phi1=phi1, phic=phic, phi2=phi2),
                include_counter_rotating=not rwa)
            return st.f01_2 - st.f01_1

        lo, hi = 0.0, 0.26
        if dressed_mismatch(lo) * dressed_mismatch(hi) > 0:
            raise ValueError(f"cannot tune q2 onto q1 at coupler bias {phic}")
        phi2_res = brentq(dressed_mismatch, lo, hi, xtol=1e-12)
        st = static_couplings(
            device_params(device, phi1=phi1, phic=phic, phi2=phi2_res),
            include_counter_rotating=not rwa)
        g_stat[i] = st.g01
        duration = n_periods / max(2.0 * abs(st.g01), 4e-5)
        fits = []
        for phi2 in phi2_res + offsets:
            p = device_params(device, phi1=phi1, phic=phic, phi2=phi2)
            pulse = FluxPulse(phi_dc=phi2, amplitude=0.0, duration=duration,
                              ramp=0.0)
            prop = propagate(p, pulse, None, specs, rwa=rwa,
                             initial_state=basis_index(1, 0, 0),
                             n_samples=n_samples,
                             subspace=SINGLE_EXCITATION if rwa else None)
            col = (prop.subspace.index(basis_index(0, 0, 1)))
            pop01 = np.abs(prop.trajectory[:, col]) ** 2
            try:
                fits.append(fit_exchange(prop.times, pop01).g)
            except ValueError:
                continue
        if not fits:
            raise ValueError(
                f"no exchange oscillation resolved at coupler bias {phic}")
        g_dyn[i] = min(fits)
    return g_dyn, g_stat
