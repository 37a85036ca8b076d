"""Command-line entry point: group checks, two-body and three-body runs.

    poincare-fewbody group-check [--config cfg.json] [--out DIR] [--seed N]
    poincare-fewbody twobody bound|phases [...]
    poincare-fewbody threebody [...]

Every output carries ``schema_version``; payloads contain no timestamps, so an
identical config and seed reproduce the files byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .clebsch import cg_orthonormality_check, intertwining_deviation
from .errors import NumericalError, ParameterError
from .irreps import (
    BasisForm,
    in_kinematic_subgroup,
    kinematic_subgroup_check,
    sample_coordinates,
    sample_dynamic_element,
    sample_kinematic_element,
)
from .kinematics import SpinKind, cocycle_deviation, random_su2, wigner_d
from .numerics import make_grid
from .threebody import make_jacobi_grid, solve_trimer
from .twobody import (
    MTParameters,
    coester_embed,
    malfliet_tjon_kernel,
    solve_bound_states,
    solve_nr_bound_states,
    solve_phase_shifts,
)

SCHEMA_VERSION = 1
log = logging.getLogger("poincare_fewbody")


@dataclass(frozen=True)
class GridConfig:
    n_k: int = 48
    n_q: int = 32
    n_angle: int = 24
    k_scale: float = 400.0
    q_scale: float = 300.0


@dataclass(frozen=True)
class Tolerances:
    cocycle: float = 1e-11
    unitarity: float = 1e-11
    subgroup: float = 1e-10
    cg: float = 1e-8
    trimer_z: float = 1e-8


@dataclass(frozen=True)
class Samples:
    cocycle: int = 1000
    unitarity: int = 200
    subgroup: int = 100
    cg: int = 10


@dataclass(frozen=True)
class RunConfig:
    m1: float = 938.92
    m2: float = 938.92
    m3: float = 938.92
    interaction: MTParameters = field(default_factory=MTParameters)
    grid: GridConfig = field(default_factory=GridConfig)
    tolerances: Tolerances = field(default_factory=Tolerances)
    samples: Samples = field(default_factory=Samples)
    k_list: tuple = tuple(np.linspace(10.0, 500.0, 10).tolist())
    threebody_grid: tuple = (32, 24)
    out: str = "results"
    seed: int = 0

    def __post_init__(self):
        for name in ("m1", "m2", "m3"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        g = self.grid
        if min(g.n_k, g.n_q, g.n_angle) < 2 or not (g.k_scale > 0 and g.q_scale > 0):
            raise ParameterError("grid sizes must be >= 2 and scales positive")
        for k, v in asdict(self.tolerances).items():
            if not 0 < v < 1e-2:
                raise ParameterError(f"tolerance {k} must lie in (0, 1e-2), got {v}")
        for k, v in asdict(self.samples).items():
            if v < 1:
                raise ParameterError(f"sample count {k} must be positive")
        if any(k <= 0 for k in self.k_list):
            raise ParameterError("k_list entries must be positive")
        if self.seed < 0:
            raise ParameterError("seed must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        if "interaction" in d:
            d["interaction"] = MTParameters(**d["interaction"])
        for key, typ in (("grid", GridConfig), ("tolerances", Tolerances), ("samples", Samples)):
            if key in d:
                d[key] = typ(**d[key])
        if "k_list" in d:
            d["k_list"] = tuple(float(k) for k in d["k_list"])
        if "threebody_grid" in d:
            d["threebody_grid"] = tuple(int(n) for n in d["threebody_grid"])
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path | None) -> "RunConfig":
        if path is None:
            return cls()
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["interaction"] = self.interaction.to_dict()
        d["k_list"] = list(self.k_list)
        d["threebody_grid"] = list(self.threebody_grid)
        return d


def _write_json(path: Path, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    """CSV with a mandatory header; the schema version goes to a <name>.meta.json sidecar."""
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_json(path.with_suffix(".meta.json"), {"file": path.name, "columns": list(header)})
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def _payload_config(cfg: RunConfig) -> dict:
    # the output location is not part of the result
    d = cfg.to_dict()
    d.pop("out")
    return d


def _check(name: str, samples: int, dev: float, tol: float) -> dict:
    ok = bool(np.isfinite(dev) and dev < tol)
    return {"check_name": name, "samples": int(samples), "max_deviation": float(dev), "tolerance": tol, "pass": ok}


# ------------------------------------------------------------------ commands


def cmd_group_check(cfg: RunConfig) -> tuple[dict, int]:
    rng = np.random.default_rng(cfg.seed)
    tol, ns = cfg.tolerances, cfg.samples
    checks = []
    for kind in SpinKind:
        dev = cocycle_deviation(kind, ns.cocycle, rng)
        checks.append(_check(f"cocycle_{kind.value}", ns.cocycle, dev, tol.cocycle))

    dev = 0.0
    for j in (0.5, 1.0, 1.5, 2.0):
        u1, u2 = random_su2(rng, ns.unitarity), random_su2(rng, ns.unitarity)
        d1, d2, d12 = wigner_d(j, u1), wigner_d(j, u2), wigner_d(j, u1 @ u2)
        eye = np.eye(d1.shape[-1])
        dev = max(
            dev,
            float(np.max(np.abs(d1 @ np.conj(np.swapaxes(d1, -1, -2)) - eye))),
            float(np.max(np.abs(d12 - d1 @ d2))),
        )
    checks.append(_check("wigner_d_unitarity_homomorphism", 4 * ns.unitarity, dev, tol.unitarity))

    masses = (cfg.m1, 1.7 * cfg.m1)
    for form in BasisForm:
        wrong = 0
        for _ in range(ns.subgroup):
            pts = sample_coordinates(form, cfg.m1, 3, rng)
            g = sample_kinematic_element(form, rng)
            wrong += (not kinematic_subgroup_check(form, g.lam, g.a, masses, pts, tol=tol.subgroup)) or not in_kinematic_subgroup(form, g)
            g = sample_dynamic_element(form, rng)
            wrong += kinematic_subgroup_check(form, g.lam, g.a, masses, pts, tol=tol.subgroup) or in_kinematic_subgroup(form, g)
        # reported deviation: fraction of misclassified elements
        checks.append(_check(f"subgroup_{form.value}", 2 * ns.subgroup, wrong / (2 * ns.subgroup), tol.subgroup))

    grid = make_grid(16, cfg.grid.k_scale)
    channels = [(0, 0, 0), (1, 1, 0), (1, 0, 1), (1, 1, 1), (0, 1, 1), (2, 1, 1)]
    dev = cg_orthonormality_check(0.5, 0.5, grid, channels, cfg.m1, cfg.m2, n_k=3)
    checks.append(_check("cg_orthonormality", 3 * len(channels), dev, tol.cg))
    dev = 0.0
    for _ in range(ns.cg):
        g = sample_dynamic_element(BasisForm.POINT, rng)
        P = rng.normal(scale=200.0, size=3)
        k = float(rng.uniform(20.0, 500.0))
        for ch in ((0, 0, 0), (1, 1, 1), (2, 1, 1)):
            dev = max(dev, intertwining_deviation(0.5, 0.5, cfg.m1, cfg.m2, ch, g.lam, P, k))
    checks.append(_check("cg_intertwining", 3 * ns.cg, dev, tol.cg))

    ok = all(c["pass"] for c in checks)
    return {"command": "group-check", "seed": cfg.seed, "checks": checks, "pass": ok}, 0 if ok else 1


def _pair_kernel(cfg: RunConfig, n: int | None = None):
    grid = make_grid(n or cfg.grid.n_k, cfg.grid.k_scale)
    return malfliet_tjon_kernel(cfg.interaction, grid)


def cmd_twobody_bound(cfg: RunConfig) -> dict:
    v = _pair_kernel(cfg)
    rel = solve_bound_states(coester_embed(v, cfg.m1, cfg.m2))
    nr = solve_nr_bound_states(v, cfg.m1, cfg.m2)
    payload = {
        "command": "twobody-bound",
        "config": _payload_config(cfg),
        "relativistic": rel.to_dict(),
        "nonrelativistic": nr.to_dict(),
    }
    if len(rel.bound_masses) == 0:
        payload["status"] = "no_bound_state"
        payload["explanation"] = "the mass operator has no eigenvalue below m1 + m2 on this grid"
    else:
        payload["status"] = "bound"
    return payload


def _wrapped(d):
    return (np.asarray(d) + 0.5 * np.pi) % np.pi - 0.5 * np.pi


def cmd_twobody_phases(cfg: RunConfig) -> list[tuple]:
    v = _pair_kernel(cfg)
    k = np.asarray(cfg.k_list, dtype=float)
    d_rel = solve_phase_shifts(v, True, k, cfg.m1, cfg.m2, method="direct")
    d_nr = solve_phase_shifts(v, False, k, cfg.m1, cfg.m2)
    return [(float(a), float(b), float(c), float(_wrapped(b - c))) for a, b, c in zip(k, d_rel, d_nr)]


def cmd_threebody(cfg: RunConfig) -> tuple[dict, list, list]:
    m = cfg.m3
    if not (cfg.m1 == cfg.m2 == cfg.m3):
        raise ParameterError("the three-body solver treats identical bosons: m1 = m2 = m3 required")
    n_k, n_q = cfg.threebody_grid
    results = {}
    conv = {True: [], False: []}
    for rel in (True, False):
        sols = []
        for scale in (1, 2):
            g = make_jacobi_grid(scale * n_k, scale * n_q, cfg.grid.n_angle, cfg.grid.k_scale, cfg.grid.q_scale)
            v = malfliet_tjon_kernel(cfg.interaction, g.k_grid)
            sol = solve_trimer(v, m, g, relativistic=rel, xtol=cfg.tolerances.trimer_z)
            log.info("trimer relativistic=%s n_k=%d n_q=%d M3=%s", rel, g.shape[0], g.shape[1], sol.M3)
            sols.append(sol)
            conv[rel].append((g.shape[0], g.shape[1], float("nan") if sol.M3 is None else sol.M3))
        results[rel] = sols
    payload = {"command": "threebody", "config": _payload_config(cfg)}
    fine_rel, fine_nr = results[True][1], results[False][1]
    if not (fine_rel.bound and fine_nr.bound):
        payload["status"] = "no_bound_state"
        payload["relativistic"] = fine_rel.to_dict()
        payload["nonrelativistic"] = fine_nr.to_dict()
        return payload, conv[True], conv[False]
    payload["status"] = "bound"
    payload["relativistic"] = fine_rel.to_dict()
    payload["nonrelativistic"] = fine_nr.to_dict()
    payload["M3_rel_MeV"] = fine_rel.M3
    payload["M3_nr_MeV"] = fine_nr.M3
    payload["difference_MeV"] = fine_rel.M3 - fine_nr.M3
    payload["convergence_MeV"] = {
        "relativistic": abs(results[True][1].M3 - results[True][0].M3) if results[True][0].bound else None,
        "nonrelativistic": abs(results[False][1].M3 - results[False][0].M3) if results[False][0].bound else None,
    }
    return payload, conv[True], conv[False]


# ---------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poincare-fewbody", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="seed for sampled checks (overrides the config)")

    common(sub.add_parser("group-check", help="kinematic and representation identities"))
    tb = sub.add_parser("twobody", help="two-body bound state or phase shifts")
    tb.add_argument("mode", choices=["bound", "phases"])
    common(tb)
    common(sub.add_parser("threebody", help="relativistic and nonrelativistic trimer"))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        overrides = {}
        if args.out is not None:
            overrides["out"] = args.out
        if args.seed is not None:
            overrides["seed"] = args.seed
        cfg = replace(cfg, **overrides)
    except (OSError, ValueError, TypeError, ParameterError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        return _run(args, cfg)
    except (ParameterError, NumericalError) as exc:
        print(f"error: {args.command} failed: {exc}", file=sys.stderr)
        return 1


def _run(args, cfg: RunConfig) -> int:
    out = Path(cfg.out)
    if args.command == "group-check":
        report, code = cmd_group_check(cfg)
        _write_json(out / "group_check.json", report)
        for c in report["checks"]:
            print(f"{'PASS' if c['pass'] else 'FAIL'} {c['check_name']}: {c['max_deviation']:.3e}")
        return code
    if args.command == "twobody":
        if args.mode == "bound":
            payload = cmd_twobody_bound(cfg)
            _write_json(out / "twobody_bound.json", payload)
            print(f"{payload['status']}: {payload['relativistic']['binding_energies_MeV']}")
            return 0
        rows = cmd_twobody_phases(cfg)
        _write_csv(out / "phases.csv", ["k_MeV", "delta_rel_rad", "delta_nr_rad", "diff"], rows)
        print(f"wrote {len(rows)} phase shifts")
        return 0
    payload, conv_rel, conv_nr = cmd_threebody(cfg)
    _write_json(out / "trimer.json", payload)
    _write_csv(out / "convergence.csv", ["n_k", "n_q", "M3_MeV"], conv_rel)
    _write_csv(out / "convergence_nr.csv", ["n_k", "n_q", "M3_MeV"], conv_nr)
    print(f"{payload['status']}: M3_rel={payload.get('M3_rel_MeV')} M3_nr={payload.get('M3_nr_MeV')}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
