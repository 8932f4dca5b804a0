"""Coincidence counting, fringe fitting and state reconstruction.

Counts are Poisson draws around ``rate_scale * integration_time * p`` for
each analyzer setting.  Every count record gets its own counter-based
random stream keyed by ``(seed, record index)``, so a record's draw does
not depend on how many other records are simulated or in which order.

Reconstruction is maximum-likelihood: a diluted fixed-point ascent on the
Poisson log-likelihood that stays on physical states by construction.  It
runs on the smallest mode subspace spanned by the design and embeds the
result back into the full space for reporting.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from ._util import atomic_write_text
from .chain import ChainConfig, DistinguishabilityModel, pair_rate_operator
from .errors import CompletenessError, FitError
from .modes import (BiphotonKet, DensityOperator, MeasurementSetting, ModeSpace,
                    SinglePhotonKet, fidelity, projection_probability)

MLE_TOL = 1e-10
MLE_MAX_ITER = 10_000
MLE_DILUTION = 0.5
_PROB_FLOOR = 1e-12
_DILUTION_CAP = 1e6
_STALL_WINDOW = 64
_STALL_RATIO = 0.5
_TRIM_BURST = 64
_TRIM_MASS_CAP = 0.05
_REGROW_TOL = 1e-7


@dataclass(frozen=True)
class CountRecord:
    """One simulated (or imported) coincidence measurement.

    ``counts`` is an integer for sampled data; exact-mean (noiseless)
    records may carry fractional values.  ``rate_scale`` is the pair rate a
    unit-probability setting would see, in counts per unit time.
    """

    setting: MeasurementSetting
    counts: float
    integration_time: float
    rate_scale: float

    def __post_init__(self):
        if self.counts < 0:
            raise ValueError(f"counts must be >= 0, got {self.counts}")
        if self.integration_time <= 0:
            raise ValueError("integration_time must be > 0")
        if self.rate_scale <= 0:
            raise ValueError("rate_scale must be > 0")


class TomographyDesign:
    """An ordered set of analyzer settings that determines a state.

    The design's subspace is the span of the analyzer kets per photon; at
    construction the projectors are checked to span the full operator space
    of that subspace (informational completeness), otherwise
    :class:`CompletenessError` is raised.
    """

    def __init__(self, settings: Sequence[MeasurementSetting]):
        settings = tuple(settings)
        if not settings:
            raise CompletenessError("design has no settings")
        space = settings[0].space
        for setting in settings:
            if setting.space != space:
                raise ValueError("settings mix different mode spaces")
        self.settings = settings
        self.space = space
        self.signal_modes = tuple(sorted(
            {ell for s in settings for ell in s.signal.support()}))
        self.idler_modes = tuple(sorted(
            {ell for s in settings for ell in s.idler.support()}))
        stack = self._projector_stack()
        dim = stack.shape[1]
        flat = stack.reshape(len(settings), dim * dim)
        rank = np.linalg.matrix_rank(flat, tol=1e-9)
        if rank < dim * dim:
            raise CompletenessError(
                f"design spans {rank} of {dim * dim} operator dimensions on "
                f"its {len(self.signal_modes)}x{len(self.idler_modes)} subspace")

    @property
    def subspace_dimension(self) -> int:
        return len(self.signal_modes) * len(self.idler_modes)

    def subspace_vector(self, setting: MeasurementSetting) -> np.ndarray:
        """Joint analyzer ket restricted to the design subspace."""
        sig = np.array([setting.signal.amplitude(l) for l in self.signal_modes])
        idl = np.array([setting.idler.amplitude(l) for l in self.idler_modes])
        return np.kron(sig, idl)

    def _projector_stack(self) -> np.ndarray:
        vecs = np.stack([self.subspace_vector(s) for s in self.settings])
        return np.einsum("ka,kb->kab", vecs, vecs.conj())

    @cached_property
    def projectors(self) -> np.ndarray:
        """Stack of subspace projectors, shape ``(n_settings, dim, dim)``."""
        return self._projector_stack()

    def embed(self, sub_matrix: np.ndarray) -> np.ndarray:
        """Embed a subspace operator into the full joint space."""
        n = self.space.joint_dimension
        full = np.zeros((n, n), dtype=complex)
        idx = [self.space.joint_index(ls, li)
               for ls in self.signal_modes for li in self.idler_modes]
        full[np.ix_(idx, idx)] = sub_matrix
        return full


def pairwise_superposition(space: ModeSpace, ell_a: int, ell_b: int,
                           phase: float) -> SinglePhotonKet:
    """Balanced analyzer ket ``(|ell_a> + e^{i*phase}|ell_b>)/sqrt(2)``."""
    amp = np.exp(1j * phase) / np.sqrt(2.0)
    return SinglePhotonKet(space, {ell_a: 1.0 / np.sqrt(2.0), ell_b: amp})


def standard_design(space: ModeSpace, signal_modes: Iterable[int],
                    idler_modes: Iterable[int] | None = None) -> TomographyDesign:
    """Product design of basis states and pairwise superpositions.

    Per photon: every basis ket over the given modes plus, for every mode
    pair, the two balanced superpositions with phase 0 and pi/2.  That is
    ``d**2`` analyzer kets per photon, informationally complete for the
    ``d``-mode subspace.
    """
    signal_modes = tuple(sorted(signal_modes))
    idler_modes = signal_modes if idler_modes is None else tuple(sorted(idler_modes))

    def photon_settings(modes: tuple[int, ...]) -> list[SinglePhotonKet]:
        kets = [SinglePhotonKet(space, {m: 1.0}) for m in modes]
        for i, a in enumerate(modes):
            for b in modes[i + 1:]:
                kets.append(pairwise_superposition(space, a, b, 0.0))
                kets.append(pairwise_superposition(space, a, b, np.pi / 2.0))
        return kets

    settings = [MeasurementSetting(sig, idl)
                for sig in photon_settings(signal_modes)
                for idl in photon_settings(idler_modes)]
    return TomographyDesign(settings)


def _record_stream(seed: int, *key: int) -> np.random.Generator:
    # Philox is counter-based: streams keyed by (seed, record index) are
    # independent of draw order and of how many records exist.
    ss = np.random.SeedSequence(entropy=seed, spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def simulate_counts(rho: DensityOperator, design: TomographyDesign,
                    rate_scale: float, integration_time: float,
                    seed: int) -> list[CountRecord]:
    """Poisson coincidence counts for every setting of a design."""
    if rate_scale <= 0 or integration_time <= 0:
        raise ValueError("rate_scale and integration_time must be > 0")
    records = []
    for index, setting in enumerate(design.settings):
        p = projection_probability(rho, setting)
        mean = rate_scale * integration_time * p
        counts = int(_record_stream(seed, index).poisson(mean))
        records.append(CountRecord(setting, counts, integration_time, rate_scale))
    return records


def expected_counts(rho: DensityOperator, design: TomographyDesign,
                    rate_scale: float,
                    integration_time: float) -> list[CountRecord]:
    """Exact-mean (noiseless) records: Poisson sampling replaced by means."""
    if rate_scale <= 0 or integration_time <= 0:
        raise ValueError("rate_scale and integration_time must be > 0")
    return [CountRecord(setting,
                        rate_scale * integration_time
                        * projection_probability(rho, setting),
                        integration_time, rate_scale)
            for setting in design.settings]


@dataclass
class ReconstructionResult:
    """Output of :func:`mle_reconstruct`.

    ``iterations == max_iter`` flags non-convergence.  The fidelity fields
    are filled by bootstrap-based pipelines and stay ``None`` otherwise.
    """

    rho: DensityOperator
    iterations: int
    log_likelihood: float
    fidelity_mean: float | None = None
    fidelity_stddev: float | None = None

    def __post_init__(self):
        if self.fidelity_stddev is not None and self.fidelity_stddev < 0:
            raise ValueError("fidelity_stddev must be >= 0")


def _poisson_loglik(counts: np.ndarray, scales: np.ndarray,
                    probs: np.ndarray) -> float:
    means = scales * probs
    terms = np.where(counts > 0, counts * np.log(means), 0.0) - means
    return float(terms.sum())


def _match_records(records: Sequence[CountRecord],
                   design: TomographyDesign) -> None:
    if len(records) != len(design.settings):
        raise ValueError(
            f"{len(records)} records for {len(design.settings)} design settings")
    for record, setting in zip(records, design.settings):
        if record.setting is setting:
            continue
        same = (record.setting.signal.amplitudes == setting.signal.amplitudes
                and record.setting.idler.amplitudes == setting.idler.amplitudes)
        if not same:
            raise ValueError("record settings do not match the design order")


def mle_reconstruct(records: Sequence[CountRecord], design: TomographyDesign,
                    max_iter: int = MLE_MAX_ITER, tol: float = MLE_TOL,
                    dilution: float = MLE_DILUTION,
                    likelihood_trace: list[float] | None = None
                    ) -> ReconstructionResult:
    """Maximum-likelihood state estimate from coincidence records.

    Diluted fixed-point ascent from the maximally mixed state: the ascent
    operator is the likelihood gradient ratio in the metric of the summed
    projector ``G = sum_k s_k Pi_k`` (with a trace-constraint shift), so the
    exact-mean data of any state is a fixed point.  A step that would lower
    the Poisson log-likelihood is retried with a smaller dilution, keeping
    the likelihood non-decreasing; the dilution regrows on success.
    Convergence is declared when the update max-norm falls below ``tol``.

    The multiplicative step preserves rank, so a rank-deficient optimum is
    only approached asymptotically (residual eigenvalues decay like 1/k).
    When progress stalls, trial truncations of the smallest eigenvalues are
    relaxed for a burst of steps and committed only if the likelihood
    catches up, which restores geometric convergence without ever lowering
    the recorded likelihood.  A truncation that later proves wrong is
    undone by the stationarity check: whenever moving mass toward a null
    direction would raise the likelihood, that direction is mixed back in
    before convergence is declared.

    ``likelihood_trace``, if given, collects the accepted per-iteration
    log-likelihood values (diagnostic).
    """
    if not records:
        raise ValueError("no count records given")
    _match_records(records, design)
    counts = np.array([r.counts for r in records], dtype=float)
    scales = np.array([r.rate_scale * r.integration_time for r in records])
    counts_total = float(counts.sum())
    if counts_total <= 0:
        raise ValueError("all records have zero counts")

    projectors = design.projectors
    n_settings, dim, _ = projectors.shape
    flat = projectors.reshape(n_settings, dim * dim)
    trace_flat = projectors.transpose(0, 2, 1).reshape(n_settings, dim * dim)
    gram = np.tensordot(scales, projectors, axes=1)
    gram_floor = float(np.linalg.eigvalsh(gram)[0])
    identity = np.eye(dim)

    def probs_of(rho: np.ndarray) -> np.ndarray:
        return np.maximum((trace_flat @ rho.ravel()).real, _PROB_FLOOR)

    def slack(value: float) -> float:
        return 1e-12 * (1.0 + abs(value))

    def advance(rho, probs, loglik, eps):
        """One guarded ascent step; shrinks the dilution until the
        likelihood is non-decreasing, regrows it on success."""
        ratio = ((counts / probs) @ flat).reshape(dim, dim)
        shift = counts_total - float(scales @ probs)
        shift = max(shift, -0.9 * gram_floor)
        ascent = np.linalg.solve(gram + shift * identity, ratio)
        while True:
            step = (identity + eps * ascent) / (1.0 + eps)
            candidate = step @ rho @ step.conj().T
            candidate = (candidate + candidate.conj().T) / 2.0
            candidate /= candidate.trace().real
            new_probs = probs_of(candidate)
            new_loglik = _poisson_loglik(counts, scales, new_probs)
            if new_loglik >= loglik - slack(loglik):
                update = float(np.max(np.abs(candidate - rho)))
                return (candidate, new_probs, new_loglik,
                        min(eps * 2.0, _DILUTION_CAP), update, True)
            if eps <= 1e-6:
                return rho, probs, loglik, eps, 0.0, False
            eps /= 2.0

    def polish(rho, loglik):
        """Trial truncations of the smallest eigenvalues, each relaxed for
        a burst of guarded steps; commits the deepest cut whose likelihood
        catches back up with the current iterate."""
        eigvals, eigvecs = np.linalg.eigh(rho)
        eigvals = np.clip(eigvals, 0.0, None)
        order = np.argsort(eigvals)[::-1]
        positive = int(np.sum(eigvals > 1e-15 * eigvals[order[0]]))
        best = None
        for rank in range(positive - 1, 0, -1):
            if eigvals[order[rank:]].sum() > _TRIM_MASS_CAP:
                break
            trimmed = np.zeros_like(eigvals)
            trimmed[order[:rank]] = eigvals[order[:rank]]
            cand = (eigvecs * trimmed) @ eigvecs.conj().T
            cand = (cand + cand.conj().T) / 2.0
            cand /= cand.trace().real
            cand_probs = probs_of(cand)
            cand_loglik = _poisson_loglik(counts, scales, cand_probs)
            cand_eps = dilution
            for _ in range(_TRIM_BURST):
                cand, cand_probs, cand_loglik, cand_eps, upd, ok = advance(
                    cand, cand_probs, cand_loglik, cand_eps)
                if not ok or upd < tol:
                    break
            if cand_loglik >= loglik - slack(loglik):
                best = (cand, cand_probs, cand_loglik, cand_eps)
            else:
                break
        return best

    def regrow(rho, probs, loglik):
        """Stationarity check on the small-eigenvalue subspace: if some
        starved direction's likelihood gradient exceeds the trace
        multiplier, mix that direction back in.  Escapes a prematurely
        trimmed face and short-cuts the slow growth of tiny eigenvalues."""
        eigvals, eigvecs = np.linalg.eigh(rho)
        starved = eigvecs[:, eigvals < 1e-2 * float(eigvals[-1])]
        if starved.shape[1] == 0:
            return None
        gradient = ((counts / probs) @ flat).reshape(dim, dim) - gram
        multiplier = counts_total - float(scales @ probs)
        reduced = starved.conj().T @ gradient @ starved
        reduced = (reduced + reduced.conj().T) / 2.0
        gaps, directions = np.linalg.eigh(reduced)
        if gaps[-1] - multiplier <= _REGROW_TOL * (1.0 + counts_total):
            return None
        direction = starved @ directions[:, -1]
        spike = np.outer(direction, direction.conj())
        for delta in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8):
            cand = (1.0 - delta) * rho + delta * spike
            cand = (cand + cand.conj().T) / 2.0
            cand /= cand.trace().real
            cand_probs = probs_of(cand)
            cand_loglik = _poisson_loglik(counts, scales, cand_probs)
            if cand_loglik > loglik + slack(loglik):
                return cand, cand_probs, cand_loglik
        return None

    rho = identity.astype(complex) / dim
    probs = probs_of(rho)
    loglik = _poisson_loglik(counts, scales, probs)
    if likelihood_trace is not None:
        likelihood_trace.append(loglik)
    eps = dilution
    checkpoint = math.inf
    converged = False
    iterations = 0

    while iterations < max_iter:
        rho, probs, loglik, eps, update, ok = advance(rho, probs, loglik, eps)
        iterations += 1
        if ok and likelihood_trace is not None:
            likelihood_trace.append(loglik)
        if not ok or update < tol:
            # Fixed point or tiny update: genuine convergence unless a
            # trimmed direction still wants mass back.
            grown = regrow(rho, probs, loglik)
            if grown is None:
                converged = ok
                break
            rho, probs, loglik = grown
            if likelihood_trace is not None:
                likelihood_trace.append(loglik)
            eps = dilution
            checkpoint = math.inf
            continue
        if iterations % _STALL_WINDOW == 0:
            if update >= _STALL_RATIO * checkpoint:
                polished = polish(rho, loglik)
                if polished is not None:
                    rho, probs, loglik, eps = polished
                    if likelihood_trace is not None:
                        likelihood_trace.append(loglik)
                    update = math.inf
                else:
                    grown = regrow(rho, probs, loglik)
                    if grown is not None:
                        rho, probs, loglik = grown
                        if likelihood_trace is not None:
                            likelihood_trace.append(loglik)
                        eps = dilution
                        update = math.inf
            checkpoint = update

    if not converged:
        # Budget exhausted or stuck near the boundary: one last polish,
        # rejected if it would leave a profitable null direction behind.
        polished = polish(rho, loglik)
        if polished is not None:
            cand, cand_probs, cand_loglik, _ = polished
            if regrow(cand, cand_probs, cand_loglik) is None:
                rho, probs, loglik = cand, cand_probs, cand_loglik
                if likelihood_trace is not None:
                    likelihood_trace.append(loglik)

    full = design.embed(rho)
    return ReconstructionResult(DensityOperator(design.space, full),
                                iterations, loglik)


def bootstrap_fidelity(records: Sequence[CountRecord], design: TomographyDesign,
                       target: BiphotonKet, resamples: int = 100,
                       seed: int = 0) -> tuple[float, float]:
    """Bootstrap mean and spread of the target fidelity.

    Each resample re-draws every record as Poisson around its observed
    count (stream keyed by ``(seed, resample index)``), reruns the MLE and
    evaluates the fidelity against ``target``.  Returns ``(mean, stddev)``
    with the sample standard deviation (ddof 1).
    """
    if resamples < 10:
        raise ValueError(f"resamples must be >= 10, got {resamples}")
    _match_records(records, design)
    observed = np.array([r.counts for r in records], dtype=float)
    fidelities = np.empty(resamples)
    for index in range(resamples):
        drawn = _record_stream(seed, index, 1).poisson(observed)
        resampled = [CountRecord(r.setting, int(c), r.integration_time, r.rate_scale)
                     for r, c in zip(records, drawn)]
        result = mle_reconstruct(resampled, design)
        fidelities[index] = fidelity(target, result.rho)
    return float(fidelities.mean()), float(fidelities.std(ddof=1))


def crosstalk_matrix(rho: DensityOperator,
                     ell_range: Iterable[int]) -> np.ndarray:
    """Basis coincidence probabilities over a mode range, peak-normalized.

    Entry ``(i, j)`` is the coincidence probability of the basis setting
    ``(ell_i, ell_j)``, scaled so the largest entry is 1.
    """
    ells = list(ell_range)
    matrix = np.array([[rho.probability((li, lj)) for lj in ells] for li in ells])
    peak = matrix.max()
    if peak <= 0:
        raise ValueError("state has no probability in the requested mode range")
    return matrix / peak


@dataclass(frozen=True)
class VisibilityFit:
    """Least-squares fringe fit ``A * (1 + V cos(phi + phi0))``."""

    amplitude: float
    visibility: float
    phase_offset: float
    visibility_stderr: float


def visibility(fringe: Sequence[tuple[float, float]]) -> VisibilityFit:
    """Fit a phase fringe and return its visibility with a standard error.

    ``fringe`` is a sequence of ``(phase, counts)`` samples; at least 8
    points spanning a full turn are required.  Gauss-Newton on the
    three-parameter model with the analytic Jacobian, initialized from the
    discrete extrema; the standard error comes from the residual-scaled
    covariance.  Visibility is reported with ``V >= 0`` by absorbing a sign
    flip into the phase offset.
    """
    data = np.asarray(list(fringe), dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("fringe must be a sequence of (phase, counts) pairs")
    if len(data) < 8:
        raise ValueError(f"need at least 8 fringe points, got {len(data)}")
    phis, ys = data[:, 0], data[:, 1]
    if phis.max() - phis.min() < 2.0 * np.pi - 1e-9:
        raise ValueError("fringe phases must span a full 2*pi turn")

    ymax, ymin = ys.max(), ys.min()
    amp = (ymax + ymin) / 2.0
    if amp <= 0:
        raise FitError("degenerate fringe: non-positive mean amplitude")
    vis = (ymax - ymin) / (ymax + ymin)
    phase = float(-phis[np.argmax(ys)])

    def jac_and_residual(a, v, p):
        cos = np.cos(phis + p)
        sin = np.sin(phis + p)
        residual = a * (1.0 + v * cos) - ys
        jacobian = np.stack([1.0 + v * cos, a * cos, -a * v * sin], axis=1)
        return jacobian, residual

    for _ in range(100):
        jacobian, residual = jac_and_residual(amp, vis, phase)
        delta, *_ = np.linalg.lstsq(jacobian, -residual, rcond=None)
        ssr = float(residual @ residual)
        step = 1.0
        for _ in range(40):
            trial = amp + step * delta[0], vis + step * delta[1], phase + step * delta[2]
            _, trial_residual = jac_and_residual(*trial)
            if float(trial_residual @ trial_residual) <= ssr * (1.0 + 1e-12) + 1e-300:
                break
            step /= 2.0
        amp, vis, phase = trial
        if np.max(np.abs(step * delta)) < 1e-12 * (1.0 + abs(amp)):
            break

    if amp <= 0:
        raise FitError(f"degenerate fringe fit: amplitude {amp:.4g} <= 0")
    if vis < 0:
        vis, phase = -vis, phase + np.pi

    jacobian, residual = jac_and_residual(amp, vis, phase)
    dof = len(ys) - 3
    variance = float(residual @ residual) / dof
    covariance = variance * np.linalg.pinv(jacobian.T @ jacobian)
    stderr = float(np.sqrt(max(covariance[1, 1], 0.0)))
    return VisibilityFit(float(amp), float(vis), float(phase % (2.0 * np.pi)),
                         stderr)


def simulate_fringe(chain: ChainConfig, setting: MeasurementSetting,
                    rate_scale: float, integration_time: float, *,
                    disting: DistinguishabilityModel | None = None,
                    shifter_index: int = 0, n_points: int = 16,
                    seed: int | None = None) -> list[tuple[float, float]]:
    """Coincidence fringe vs the phase of one chain phase shifter.

    Sweeps the ``shifter_index``-th phase shifter over an inclusive
    ``[0, 2*pi]`` grid.  Rates come from the unnormalized pair-rate operator
    so interference modulates the count rate itself.  With ``seed`` the
    counts are Poisson draws (stream keyed per grid point); without, exact
    means are returned.
    """
    if n_points < 8:
        raise ValueError(f"need at least 8 fringe points, got {n_points}")
    if rate_scale <= 0 or integration_time <= 0:
        raise ValueError("rate_scale and integration_time must be > 0")
    vec = setting.joint_vector()
    fringe = []
    for index, phi in enumerate(np.linspace(0.0, 2.0 * np.pi, n_points)):
        op = pair_rate_operator(chain.with_phase(shifter_index, float(phi)),
                                disting)
        rate = float(np.real(vec.conj() @ op @ vec))
        mean = rate_scale * integration_time * max(rate, 0.0)
        if seed is None:
            value = mean
        else:
            value = float(_record_stream(seed, index).poisson(mean))
        fringe.append((float(phi), value))
    return fringe


# ---------------------------------------------------------------------------
# External formats


def _ket_to_json(ket: SinglePhotonKet) -> str:
    entries = [[ell, amp.real, amp.imag]
               for ell, amp in sorted(ket.amplitudes.items())]
    return json.dumps(entries, separators=(",", ":"))


def _ket_from_json(text: str, space: ModeSpace) -> SinglePhotonKet:
    return SinglePhotonKet(space, {int(ell): complex(re, im)
                                   for ell, re, im in json.loads(text)})


CSV_FIELDS = ("setting_id", "signal_ket", "idler_ket", "counts",
              "integration_time")


def records_to_csv(records: Sequence[CountRecord]) -> str:
    """Serialize count records to CSV text (see :data:`CSV_FIELDS`)."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for index, record in enumerate(records):
        counts = record.counts
        counts_text = repr(int(counts)) if float(counts).is_integer() \
            else repr(float(counts))
        writer.writerow([index, _ket_to_json(record.setting.signal),
                         _ket_to_json(record.setting.idler),
                         counts_text, repr(float(record.integration_time))])
    return buffer.getvalue()


def write_records_csv(records: Sequence[CountRecord], path: str) -> None:
    atomic_write_text(path, records_to_csv(records))


def records_from_csv(text: str, space: ModeSpace,
                     rate_scale: float) -> list[CountRecord]:
    """Parse count records from CSV text.

    The schema does not carry the source rate, so ``rate_scale`` must be
    supplied by the caller.
    """
    reader = csv.DictReader(io.StringIO(text))
    missing = set(CSV_FIELDS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"count CSV is missing columns: {sorted(missing)}")
    records = []
    for row in reader:
        setting = MeasurementSetting(_ket_from_json(row["signal_ket"], space),
                                     _ket_from_json(row["idler_ket"], space))
        counts = float(row["counts"])
        records.append(CountRecord(setting, int(counts) if counts.is_integer()
                                   else counts,
                                   float(row["integration_time"]), rate_scale))
    return records


def reconstruction_to_json(result: ReconstructionResult,
                           design: TomographyDesign) -> str:
    """Serialize a reconstruction as JSON.

    The density matrix is the design-subspace block, row-major, each entry
    as an ``[re, im]`` pair; mode labels identify the rows/columns.
    """
    idx = [design.space.joint_index(ls, li)
           for ls in design.signal_modes for li in design.idler_modes]
    block = result.rho.matrix[np.ix_(idx, idx)]
    payload = {
        "signal_modes": list(design.signal_modes),
        "idler_modes": list(design.idler_modes),
        "matrix": [[[value.real, value.imag] for value in row] for row in block],
        "iterations": result.iterations,
        "log_likelihood": result.log_likelihood,
        "fidelity_mean": result.fidelity_mean,
        "fidelity_stddev": result.fidelity_stddev,
    }
    return json.dumps(payload, sort_keys=True)
