"""Command-line front end.

Subcommands consume a setup file (see :mod:`oamsim.setupfile`) or direct
flags and write deterministic artifacts: identical arguments and seed give
byte-identical output.  Exit codes: 0 success, 1 usage, 2 setup parse or
semantic error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ._util import atomic_write_text
from .chain import CoherenceGeometry, DistinguishabilityModel, build_density, \
    build_state, coherence_satisfied
from .errors import OamSimError, SetupParseError
from .measurement import (bootstrap_fidelity, crosstalk_matrix, expected_counts,
                          mle_reconstruct, reconstruction_to_json,
                          simulate_counts, simulate_fringe, standard_design,
                          visibility)
from .modes import basis_setting, fidelity, ket_to_density
from .polarization import JonesVector, apply_qhq, solve_qhq
from .setupfile import ExperimentSpec, SetupDocument, parse_setup_file


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        atomic_write_text(out_path, text)
    else:
        sys.stdout.write(text)


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True) + "\n"


def _pick_experiment(doc: SetupDocument, kind: str,
                     name: str | None) -> ExperimentSpec:
    spec = doc.experiment(name=name, kind=kind)
    if spec is None:
        if name is not None:
            raise _UsageError(f"setup file has no {kind} experiment named {name!r}")
        spec = ExperimentSpec(kind, "default", {})
    return spec


def _uniform_disting(doc: SetupDocument,
                     gamma: float) -> DistinguishabilityModel | None:
    if gamma == 1.0:
        return None
    n_crystals = len(doc.chain().crystals())
    return DistinguishabilityModel.uniform(gamma, n_crystals)


def _cmd_build_state(args) -> int:
    doc = parse_setup_file(args.setup)
    ket = build_state(doc.chain())
    amplitudes = [[ls, li, amp.real, amp.imag]
                  for (ls, li), amp in sorted(ket.amplitudes.items())]
    _emit(_dump_json({"space": doc.space.truncation,
                      "amplitudes": amplitudes}), args.out)
    return 0


def _cmd_phase_scan(args) -> int:
    doc = parse_setup_file(args.setup)
    params = _pick_experiment(doc, "phase-scan", args.experiment)
    rate = params.get("rate", 1000.0)
    time = params.get("time", 1.0)
    points = params.get("points", 16)
    gamma = params.get("gamma", 1.0)
    shifter = params.get("shifter", 0)
    noiseless = params.get("noiseless", False)
    setting = basis_setting(doc.space, params.get("signal", 0),
                            params.get("idler", 0))
    fringe = simulate_fringe(doc.chain(), setting, rate, time,
                             disting=_uniform_disting(doc, gamma),
                             shifter_index=shifter, n_points=points,
                             seed=None if noiseless else args.seed)
    fit = visibility(fringe)
    lines = ["phi,counts"]
    lines += [f"{phi!r},{count!r}" for phi, count in fringe]
    lines.append(f"# visibility={fit.visibility!r}")
    lines.append(f"# visibility_stderr={fit.visibility_stderr!r}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_tomography(args) -> int:
    doc = parse_setup_file(args.setup)
    params = _pick_experiment(doc, "tomography", args.experiment)
    rate = params.get("rate", 10000.0)
    time = params.get("time", 1.0)
    gamma = params.get("gamma", 1.0)
    noiseless = params.get("noiseless", False)
    resamples = params.get("resamples", 100)

    chain = doc.chain()
    target = build_state(chain)
    rho = build_density(chain, _uniform_disting(doc, gamma))
    design = standard_design(doc.space, target.signal_support(),
                             target.idler_support())
    if noiseless:
        records = expected_counts(rho, design, rate, time)
        result = mle_reconstruct(records, design)
        result.fidelity_mean = fidelity(target, result.rho)
        result.fidelity_stddev = 0.0
    else:
        records = simulate_counts(rho, design, rate, time, args.seed)
        result = mle_reconstruct(records, design)
        mean, stddev = bootstrap_fidelity(records, design, target,
                                          resamples=resamples, seed=args.seed)
        result.fidelity_mean = mean
        result.fidelity_stddev = stddev

    payload = json.loads(reconstruction_to_json(result, design))
    payload["summary"] = (f"F = {result.fidelity_mean:.3f} "
                          f"+- {result.fidelity_stddev:.3f}")
    _emit(_dump_json(payload), args.out)
    return 0


def _cmd_spiral_spectrum(args) -> int:
    doc = parse_setup_file(args.setup)
    params = _pick_experiment(doc, "spiral-spectrum", args.experiment)
    gamma = params.get("gamma", 1.0)
    chain = doc.chain()
    rho = build_density(chain, _uniform_disting(doc, gamma))
    mode_range = params.get("range")
    if mode_range is None:
        ket = build_state(chain)
        support = ket.signal_support() + ket.idler_support()
        mode_range = (min(support), max(support))
    ells = list(range(mode_range[0], mode_range[1] + 1))
    matrix = crosstalk_matrix(rho, ells)
    lines = ["ell," + ",".join(str(l) for l in ells)]
    lines += [f"{ells[i]}," + ",".join(repr(float(x)) for x in row)
              for i, row in enumerate(matrix)]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_qhq_solve(args) -> int:
    if args.setup:
        doc = parse_setup_file(args.setup)
        params = _pick_experiment(doc, "qhq", args.experiment)
        try:
            input_h = params.params["input_h"]
            input_v = params.params["input_v"]
            target_deg = params.params["target_deg"]
        except KeyError as exc:
            raise _UsageError(f"qhq experiment is missing key {exc}")
    elif None not in (args.input_h, args.input_v, args.target_deg):
        try:
            input_h, input_v = complex(args.input_h), complex(args.input_v)
        except ValueError:
            raise _UsageError(
                f"could not parse amplitudes {args.input_h!r} / {args.input_v!r}")
        target_deg = args.target_deg
    else:
        raise _UsageError(
            "qhq-solve needs --input-h, --input-v and --target-deg "
            "(or --setup with a qhq experiment block)")

    norm = float(np.hypot(abs(input_h), abs(input_v)))
    if norm == 0.0:
        raise _UsageError("input polarization must be nonzero")
    state = JonesVector(input_h / norm, input_v / norm)
    target = float(np.deg2rad(target_deg))
    settings = solve_qhq(state, target)
    out = apply_qhq(settings, state)
    achieved = float(np.angle(out[1]) - np.angle(out[0])) % (2.0 * np.pi)
    payload = {
        "quarter_in_deg": float(np.rad2deg(settings[0].angle)),
        "half_deg": float(np.rad2deg(settings[1].angle)),
        "quarter_out_deg": float(np.rad2deg(settings[2].angle)),
        "achieved_phase_deg": float(np.rad2deg(achieved)),
        "weight_h": float(abs(out[0]) ** 2),
        "weight_v": float(abs(out[1]) ** 2),
    }
    _emit(_dump_json(payload), args.out)
    return 0


def _cmd_coherence_check(args) -> int:
    if args.setup:
        doc = parse_setup_file(args.setup)
        params = _pick_experiment(doc, "coherence", args.experiment)
        try:
            values = {key: params.params[key]
                      for key in ("lpa", "lpb", "lspdc", "lcoh")}
        except KeyError as exc:
            raise _UsageError(f"coherence experiment is missing key {exc}")
    elif None not in (args.lpa, args.lpb, args.lspdc, args.lcoh):
        values = {"lpa": args.lpa, "lpb": args.lpb,
                  "lspdc": args.lspdc, "lcoh": args.lcoh}
    else:
        raise _UsageError(
            "coherence-check needs --lpa, --lpb, --lspdc and --lcoh "
            "(or --setup with a coherence experiment block)")

    geometry = CoherenceGeometry(pump_path_a=values["lpa"],
                                 pump_path_b=values["lpb"],
                                 downconversion_path=values["lspdc"],
                                 coherence_length=values["lcoh"])
    imbalance = geometry.imbalance()
    margin = abs(imbalance) - geometry.coherence_length
    payload = {
        "satisfied": coherence_satisfied(geometry),
        "imbalance": float(imbalance),
        "coherence_length": float(geometry.coherence_length),
        "margin": float(margin),
    }
    _emit(_dump_json(payload), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oamsim",
                     description="Simulate and analyze multi-crystal "
                                 "OAM photon-pair sources.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, setup=True, seed=False):
        p = sub.add_parser(name, help=help_text)
        if setup:
            p.add_argument("setup", help="setup file path")
            p.add_argument("--experiment", help="experiment block name")
        if seed:
            p.add_argument("--seed", type=int, required=True,
                           help="RNG seed (mandatory; no wall-clock seeding)")
        p.add_argument("--out", help="write the artifact to this path "
                                     "(atomic; default stdout)")
        p.set_defaults(func=func)
        return p

    add("build-state", _cmd_build_state,
        "print the chain's pair state as JSON amplitudes")
    add("phase-scan", _cmd_phase_scan,
        "simulate a phase fringe and fit its visibility (CSV)", seed=True)
    add("tomography", _cmd_tomography,
        "simulate counts, reconstruct the state, report fidelity (JSON)",
        seed=True)
    add("spiral-spectrum", _cmd_spiral_spectrum,
        "coincidence crosstalk over a mode range (CSV)")

    q = add("qhq-solve", _cmd_qhq_solve,
            "waveplate angles reaching a target relative phase (JSON)",
            setup=False)
    q.add_argument("--setup", help="setup file with a qhq experiment block")
    q.add_argument("--experiment", help="experiment block name")
    q.add_argument("--input-h", help="H amplitude, e.g. 0.707 or 0.5+0.5j")
    q.add_argument("--input-v", help="V amplitude")
    q.add_argument("--target-deg", type=float,
                   help="target relative phase, degrees")

    c = add("coherence-check", _cmd_coherence_check,
            "check a pump-path imbalance against the coherence length (JSON)",
            setup=False)
    c.add_argument("--setup", help="setup file with a coherence experiment block")
    c.add_argument("--experiment", help="experiment block name")
    c.add_argument("--lpa", type=float, help="pump path to the first crystal")
    c.add_argument("--lpb", type=float, help="pump path to the second crystal")
    c.add_argument("--lspdc", type=float,
                   help="down-converted path between the crystals")
    c.add_argument("--lcoh", type=float, help="pump coherence length")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is not None and args.seed < 0:
        parser.error("--seed must be >= 0")
    try:
        return args.func(args)
    except SetupParseError as exc:
        print(f"setup error: {exc}", file=sys.stderr)
        return 2
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (OamSimError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
