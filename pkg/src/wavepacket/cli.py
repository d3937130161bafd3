"""Scenario-driven command line: evolve | detect | decompose | hls | kernel | verify.

Scenarios are flat key = value config files with [potential], [grid], [evolve],
[search], and [output] sections.  Every report embeds the resolved scenario and
a format-version string; outputs are byte-deterministic across runs and thread
counts.  Exit codes: 0 success, 1 verification failure, 2 usage/config error,
3 numerical-validity error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import concentration, phasespace, propagator, verification
from .fields import (
    ComplexField,
    Grid1D,
    boundary_amplitude,
    load_field,
    lp_norm,
    mixed_norm,
)
from .flows import PhasePoint
from .potentials import BUILTIN_LABELS, Potential, builtin
from .propagator import EvolveParams, evolve_record, save_spacetime

FORMAT_VERSION = "wpk-report/1"

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_CONFIG = 2
EXIT_VALIDITY = 3

BOUNDARY_LIMIT = 1e-8


class ConfigError(ValueError):
    pass


class ValidityError(RuntimeError):
    pass


@dataclass(frozen=True)
class Scenario:
    potential_label: str
    potential_params: tuple
    grid: Grid1D
    delta0: float
    dt: float
    record_stride: int
    t0: float
    t1: float
    qr_pairs: tuple
    search: concentration.SearchParams
    out_dir: str

    @property
    def potential(self) -> Potential:
        return builtin(self.potential_label, **dict(self.potential_params))

    def resolved(self) -> dict:
        return {
            "potential": {"label": self.potential_label, **dict(self.potential_params)},
            "grid": {"n": self.grid.n, "x_min": self.grid.x_min, "dx": self.grid.dx},
            "evolve": {
                "dt": self.dt,
                "record_stride": self.record_stride,
                "delta0": self.delta0,
                "t0": self.t0,
                "t1": self.t1,
                "qr_pairs": [list(p) for p in self.qr_pairs],
            },
            "search": {
                "delta0": self.search.delta0,
                "lambda_ladder": list(self.search.lambda_ladder or ()),
                "t_stride": self.search.t_stride,
                "x_halfrange": self.search.x_halfrange,
                "xi_halfrange": self.search.xi_halfrange,
                "dt": self.search.dt,
                "max_evals": self.search.max_evals,
                "threads": self.search.threads,
            },
            "output": {"dir": self.out_dir},
        }


def _parse_qr_pairs(text: str) -> tuple:
    pairs = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ConfigError(f"bad (q, r) pair {chunk!r}")
        pairs.append((float(parts[0]), float(parts[1])))
    return tuple(pairs)


def load_scenario(path, threads: int = 1) -> Scenario:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    try:
        pot = dict(parser["potential"]) if parser.has_section("potential") else {"label": "zero"}
        label = pot.pop("label", "zero")
        if label not in BUILTIN_LABELS:
            raise ConfigError(f"unknown potential label {label!r}")
        params = tuple((k, float(v)) for k, v in sorted(pot.items()))

        gsec = parser["grid"] if parser.has_section("grid") else {}
        n = int(gsec.get("n", 4096))
        x_min = float(gsec.get("x_min", -40.0))
        dx = float(gsec.get("dx", 80.0 / 4096))
        grid = Grid1D(n, x_min, dx)

        esec = parser["evolve"] if parser.has_section("evolve") else {}
        delta0 = float(esec.get("delta0", 0.5))
        dt = float(esec.get("dt", 2e-4))
        stride = int(esec.get("record_stride", 10))
        t0 = float(esec.get("t0", -delta0))
        t1 = float(esec.get("t1", delta0))
        qr_pairs = _parse_qr_pairs(esec.get("qr_pairs", "6,6"))

        ssec = parser["search"] if parser.has_section("search") else {}
        ladder = None
        if "lambda_ladder" in ssec:
            ladder = tuple(float(v) for v in ssec["lambda_ladder"].split(","))
        t_stride = float(ssec["t_stride"]) if "t_stride" in ssec else None
        search = concentration.SearchParams(
            delta0=delta0,
            lambda_ladder=ladder,
            t_stride=t_stride,
            x_halfrange=float(ssec.get("x_halfrange", 12.0)),
            xi_halfrange=float(ssec.get("xi_halfrange", 12.0)),
            dt=dt,
            max_evals=int(ssec.get("max_evals", 0)),
            threads=threads,
        )

        osec = parser["output"] if parser.has_section("output") else {}
        out_dir = osec.get("dir", "out")
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad scenario config: {exc}") from exc

    if not (0 < delta0 <= 1):
        raise ConfigError(f"delta0 must lie in (0, 1], got {delta0}")
    if label == "harmonic":
        omega = dict(params).get("omega", 1.0)
        if omega == 1.0 and not delta0 < math.pi / 2:
            raise ConfigError("harmonic(1) scenarios need delta0 < pi/2")
    return Scenario(label, params, grid, delta0, dt, stride, t0, t1, qr_pairs, search, out_dir)


def _report(scenario: Scenario, result: dict) -> str:
    payload = {
        "format_version": FORMAT_VERSION,
        "scenario": scenario.resolved(),
        "result": result,
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _load_input(path) -> ComplexField:
    if not Path(path).exists():
        raise ConfigError(f"input field file not found: {path}")
    return load_field(path)


def _out_dir(scenario: Scenario, override) -> Path:
    out = Path(override) if override else Path(scenario.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_evolve(scenario: Scenario, args) -> int:
    f = _load_input(args.input)
    if f.grid != scenario.grid:
        raise ConfigError("input field grid does not match scenario grid")
    params = EvolveParams(dt=scenario.dt, record_stride=scenario.record_stride)
    pot = scenario.potential
    pieces = []
    t0, t1 = scenario.t0, scenario.t1
    if t0 < 0 < t1:
        pieces = [evolve_record(pot, f, 0.0, t0, params),
                  evolve_record(pot, f, 0.0, t1, params)]
    else:
        pieces = [evolve_record(pot, f, t0, t1, params)]
    times, slices = [], []
    for piece in pieces:
        for t, s in zip(piece.times, piece.slices):
            if times and any(abs(t - seen) < 1e-15 for seen in times):
                continue
            times.append(float(t))
            slices.append(s)
    order = np.argsort(times)
    from .fields import SpacetimeField

    u = SpacetimeField(np.array(times)[order], [slices[i] for i in order])

    worst_boundary = max(boundary_amplitude(s) for s in u.slices)
    if worst_boundary > BOUNDARY_LIMIT:
        raise ValidityError(
            f"boundary amplitude {worst_boundary:.3e} exceeds {BOUNDARY_LIMIT:.0e}")

    out = _out_dir(scenario, args.out)
    save_spacetime(u, out / "slices")
    with open(out / "norms.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "mass", "boundary_amplitude"])
        for t, s in zip(u.times, u.slices):
            writer.writerow([repr(float(t)), repr(lp_norm(s, 2) ** 2),
                             repr(boundary_amplitude(s))])
    table = {}
    for q, r in scenario.qr_pairs:
        table[f"L{q:g}_t L{r:g}_x"] = mixed_norm(u, q, r)
    result = {
        "mixed_norms": table,
        "mass_initial": lp_norm(f, 2) ** 2,
        "mass_final": lp_norm(u.slices[-1], 2) ** 2,
        "boundary_amplitude_max": worst_boundary,
        "slices": len(u),
    }
    (out / "evolve.json").write_text(_report(scenario, result))
    print((out / "evolve.json").read_text(), end="")
    return EXIT_OK


def _bubble_dict(bubble: concentration.Bubble, epsilon: float, mass: float) -> dict:
    return {
        "lambda": bubble.lam,
        "t0": bubble.t0,
        "x0": bubble.x0,
        "xi0": bubble.xi0,
        "correlation_re": bubble.correlation.real,
        "correlation_im": bubble.correlation.imag,
        "abs": bubble.abs_correlation,
        "epsilon_L6": epsilon,
        "mass": mass,
        "flagged": bubble.flagged,
    }


def cmd_detect(scenario: Scenario, args) -> int:
    f = _load_input(args.input)
    search = scenario.search
    if args.max_evals is not None:
        from dataclasses import replace

        search = replace(search, max_evals=args.max_evals)
    mass = lp_norm(f, 2) ** 2
    if mass == 0.0:
        bubble = concentration.Bubble(1.0, 0.0, 0.0, 0.0, 0j, 0.0)
        epsilon = 0.0
    else:
        bubble = concentration.detect_bubble(scenario.potential, f, search)
        epsilon = concentration.measure_epsilon_l6(
            scenario.potential, f, scenario.delta0, scenario.dt)
    out = _out_dir(scenario, args.out)
    (out / "detect.json").write_text(
        _report(scenario, _bubble_dict(bubble, epsilon, mass)))
    print((out / "detect.json").read_text(), end="")
    return EXIT_OK


def cmd_decompose(scenario: Scenario, args) -> int:
    f = _load_input(args.input)
    decomposition = concentration.iterate_decomposition(
        scenario.potential, f, args.max_bubbles, args.stop_threshold,
        scenario.search, EvolveParams(dt=scenario.dt))
    out = _out_dir(scenario, args.out)
    rows = []
    for bubble, g_mass, r_mass, res in zip(
            decomposition.bubbles, decomposition.packet_masses,
            decomposition.remainders_mass, decomposition.decoupling_residuals):
        rows.append({
            "lambda": bubble.lam, "t0": bubble.t0, "x0": bubble.x0, "xi0": bubble.xi0,
            "abs": bubble.abs_correlation, "packet_mass": g_mass,
            "remainder_mass": r_mass, "decoupling_residual": res,
        })
    result = {
        "bubbles": rows,
        "initial_mass": decomposition.initial_mass,
        "final_remainder_mass": lp_norm(decomposition.final_remainder, 2) ** 2,
        "ledger_gap_relative": decomposition.ledger_gap(),
    }
    (out / "decompose.json").write_text(_report(scenario, result))
    with open(out / "ledger.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["j", "lambda", "t0", "x0", "xi0", "abs",
                         "packet_mass", "remainder_mass"])
        for j, row in enumerate(rows):
            writer.writerow([j] + [repr(row[k]) for k in
                                   ("lambda", "t0", "x0", "xi0", "abs",
                                    "packet_mass", "remainder_mass")])
    print((out / "decompose.json").read_text(), end="")
    return EXIT_OK


def cmd_hls(scenario: Scenario, args) -> int:
    f = _load_input(args.input)
    q = args.q
    if q <= 4:
        raise ConfigError("admissible scan needs q > 4 in one dimension")
    r = 2.0 * q / (q - 4.0)
    result = concentration.locate_interval(
        scenario.potential, f, (q, r),
        concentration.HlsParams(delta0=scenario.delta0, dt=scenario.dt))
    out = _out_dir(scenario, args.out)
    payload = {
        "q": q,
        "r": r,
        "t_center": result.interval.t_center,
        "half_length": result.interval.half_length,
        "score": result.interval.score,
        "lhs": result.lhs,
        "rhs": result.rhs,
        "passed": result.passed,
        "epsilon": result.epsilon,
    }
    (out / "hls.json").write_text(_report(scenario, payload))
    print((out / "hls.json").read_text(), end="")
    return EXIT_OK


def cmd_kernel(scenario: Scenario, args) -> int:
    quads_path = Path(args.quads)
    if not quads_path.exists():
        raise ConfigError(f"quadruple list not found: {quads_path}")
    rows = []
    with open(quads_path, newline="") as handle:
        for line_no, row in enumerate(csv.reader(handle), 1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if row[0].strip() == "x1":
                continue
            if len(row) != 8:
                raise ConfigError(f"{quads_path}:{line_no}: expected 8 numbers")
            rows.append([float(v) for v in row])
    out = _out_dir(scenario, args.out)
    pot = scenario.potential
    with open(out / "kernel.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["x1", "xi1", "x2", "xi2", "x3", "xi3", "x4", "xi4", "K"])
        for row in rows:
            zs = [PhasePoint(row[2 * i], row[2 * i + 1]) for i in range(4)]
            value = concentration.kernel_K(pot, *zs, delta0=scenario.delta0,
                                           grid=scenario.grid, dt=scenario.dt)
            writer.writerow([repr(v) for v in row] + [repr(value)])
    print((out / "kernel.csv").read_text(), end="")
    return EXIT_OK


def cmd_verify(scenario: Scenario, args) -> int:
    results = verification.run_suite(args.suite, scenario.potential,
                                     scenario.grid, scenario)
    print(f"1..{len(results)}")
    failed = 0
    for i, check in enumerate(results, 1):
        status = "ok" if check.passed else "not ok"
        detail = f" # {check.detail}" if check.detail else ""
        print(f"{status} {i} - {check.name}{detail}")
        if not check.passed:
            failed += 1
    return EXIT_OK if failed == 0 else EXIT_VERIFICATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavepacket",
        description="Schrodinger evolutions, wavepacket analysis, and bubble detection",
    )
    parser.add_argument("--config", required=True, help="scenario config file")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("--seed", type=int, default=0, help="corpus generation seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p_evolve = sub.add_parser("evolve", help="evolve an input field, export slices and norms")
    p_evolve.add_argument("input")

    p_detect = sub.add_parser("detect", help="detect the strongest concentration bubble")
    p_detect.add_argument("input")
    p_detect.add_argument("--max-evals", type=int, default=None)

    p_dec = sub.add_parser("decompose", help="iterated bubble extraction with mass ledger")
    p_dec.add_argument("input")
    p_dec.add_argument("--max-bubbles", type=int, default=4)
    p_dec.add_argument("--stop-threshold", type=float, default=0.05 / (2 * math.pi))

    p_hls = sub.add_parser("hls", help="inverse-HLS interval location")
    p_hls.add_argument("input")
    p_hls.add_argument("--q", type=float, default=8.0)

    p_kernel = sub.add_parser("kernel", help="four-wavepacket kernel values")
    p_kernel.add_argument("quads", help="CSV of x1,xi1,...,x4,xi4 rows")

    p_verify = sub.add_parser("verify", help="run a verification suite")
    p_verify.add_argument("suite", choices=["flow", "propagator", "phasespace",
                                            "concentration", "all"])
    return parser


COMMANDS = {
    "evolve": cmd_evolve,
    "detect": cmd_detect,
    "decompose": cmd_decompose,
    "hls": cmd_hls,
    "kernel": cmd_kernel,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        scenario = load_scenario(args.config, threads=args.threads)
        return COMMANDS[args.command](scenario, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidityError as exc:
        print(f"numerical validity error: {exc}", file=sys.stderr)
        return EXIT_VALIDITY


if __name__ == "__main__":
    sys.exit(main())
