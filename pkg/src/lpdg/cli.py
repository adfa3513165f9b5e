"""Command line front end: registered cases, single runs, convergence sweeps.

Outputs are plain CSV (17 significant digits, LF line endings) plus a
metadata JSON, so repeated runs of one configuration are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .basis import gauss_lobatto
from .field import ConservedState, FarField, PERIODIC, project_initial
from .integrator import RunParams, SCHEMES, StepReport, advance, default_scheme
from .limiter import LimiterConfig
from .thermo import GasModel
from . import verify


@dataclass(frozen=True)
class CaseSetup:
    name: str
    model: GasModel
    x_left: float
    x_right: float
    boundary_default: str
    t_end_default: float
    initial: Callable
    exact: Optional[Callable] = None
    source: Optional[Callable] = None
    far_states: Optional[tuple] = None
    density_default: bool = False
    entropy_default: bool = False


def _manufactured() -> CaseSetup:
    model = GasModel.from_mach(0.1, 1.4)

    def initial(x):
        return verify.manufactured_exact(x, 0.0)

    def exact(x, t):
        return verify.manufactured_exact(x, t)

    def source(x, t):
        return verify.manufactured_source(model, x, t)

    return CaseSetup(
        name="manufactured",
        model=model,
        x_left=0.0,
        x_right=1.0,
        boundary_default="periodic",
        t_end_default=5.0,
        initial=initial,
        exact=exact,
        source=source,
    )


def _riemann(name, left, right, kappa, gamma, t_end) -> CaseSetup:
    model = GasModel(kappa=kappa, gamma=gamma)
    left = ConservedState(*left)
    right = ConservedState(*right)

    def initial(x):
        # Piecewise-constant data per element (the L2 projection when the
        # jump falls on an interface); a node exactly on the jump is
        # assigned by its element's side, not by the node coordinate.
        x = np.asarray(x, dtype=float)
        centers = x.mean(axis=-1, keepdims=True)
        mask = np.broadcast_to(centers < 0.0, x.shape)
        return ConservedState(
            rho=np.where(mask, left.rho, right.rho),
            mom=np.where(mask, left.mom, right.mom),
        )

    def exact(x, t):
        case = verify.RiemannCase(left=left, right=right, model=model, t_eval=t, label=name)
        return verify.riemann_exact_at(case, x)

    return CaseSetup(
        name=name,
        model=model,
        x_left=-0.5,
        x_right=0.5,
        boundary_default="farfield",
        t_end_default=t_end,
        initial=initial,
        exact=exact,
        far_states=(left, right),
        density_default=True,
        entropy_default=True,
    )


def _build_cases():
    gm = 1.6
    kap = (gm - 1.0) ** 2 / (4.0 * gm)
    return {
        "manufactured": _manufactured(),
        "rp1": _riemann("rp1", (1.0, 1.0), (2.0, 0.5), kap, gm, 0.3),
        "rp2": _riemann("rp2", (1.0, 2.0), (2.0, 1.0), kap, gm, 0.3),
        "rp3": _riemann("rp3", (1.0, -0.5), (0.5, -0.5), kap, gm, 0.4),
        "rp4": _riemann("rp4", (1.0, -5.0), (1.0, 5.0), 1.0, 1.4, 0.07),
    }


CASES = _build_cases()


def get_case(name: str) -> CaseSetup:
    try:
        return CASES[name.lower()]
    except KeyError:
        raise KeyError(
            f"unknown case {name!r}; available: {', '.join(sorted(CASES))}"
        ) from None


def make_boundary(case: CaseSetup, kind: str):
    if kind == "periodic":
        return PERIODIC
    if kind == "farfield":
        if case.far_states is not None:
            left, right = case.far_states
        else:
            xl = np.array([case.x_left])
            xr = np.array([case.x_right])
            ul = case.initial(xl)
            ur = case.initial(xr)
            left = ConservedState(float(ul.rho[0]), float(ul.mom[0]))
            right = ConservedState(float(ur.rho[0]), float(ur.mom[0]))
        return FarField(left=left, right=right)
    raise ValueError(f"unknown boundary {kind!r} (use 'periodic' or 'farfield')")


def build_field(case: CaseSetup, p: int, n_elem: int, boundary: Optional[str] = None):
    basis = gauss_lobatto(p)
    kind = boundary or case.boundary_default
    h = (case.x_right - case.x_left) / n_elem
    field = project_initial(
        case.model,
        case.initial,
        n_elem=n_elem,
        h=h,
        x_left=case.x_left,
        basis=basis,
        boundary=make_boundary(case, kind),
    )
    return basis, field


def run_case(case, p, n_elem, t_end=None, rk=None, params=None, boundary=None):
    """Advance a registered case; returns (basis, field, reports, t_end)."""
    basis, field = build_field(case, p, n_elem, boundary)
    t_end = case.t_end_default if t_end is None else t_end
    scheme = default_scheme(p) if rk is None else SCHEMES[rk]
    if params is None:
        params = RunParams()
    if case.source is not None and params.source is None:
        params.source = case.source
    out, reports = advance(case.model, basis, field, scheme, t_end, params)
    return basis, out, reports, t_end


def _fmt(v) -> str:
    if isinstance(v, float) and np.isnan(v):
        return "nan"
    return f"{v:.17g}"


def write_solution_csv(path: Path, basis, field):
    x = field.node_coords(basis).ravel()
    rho = field.rho.ravel()
    mom = field.mom.ravel()
    with open(path, "w", newline="\n") as fh:
        fh.write("x,rho,mom,vel\n")
        for xi, ri, mi in zip(x, rho, mom):
            fh.write(f"{_fmt(xi)},{_fmt(ri)},{_fmt(mi)},{_fmt(mi / ri)}\n")


_MONITOR_COLS = (
    "min_mean_rho",
    "convex_min_coeff",
    "convex_sum_err",
    "entropy_slack",
    "energy_slack",
    "cell_energy_slack",
    "j_copy_error",
)


def write_steps_csv(path: Path, reports: list[StepReport]):
    cols = (
        "t,dt,a_used,retries,cfl_pre,cfl_post,min_rho,mass_delta,mom_delta,"
        "theta_pos,theta_den,theta_ent," + ",".join(_MONITOR_COLS)
    )
    with open(path, "w", newline="\n") as fh:
        fh.write(cols + "\n")
        for r in reports:
            base = [
                _fmt(r.t),
                _fmt(r.dt),
                _fmt(r.a_used),
                str(r.retries),
                _fmt(r.cfl_pre),
                _fmt(r.cfl_post),
                _fmt(r.min_rho),
                _fmt(r.mass_delta),
                _fmt(r.mom_delta),
                _fmt(min(s.theta_pos_min for s in r.stages)),
                _fmt(min(s.theta_den_min for s in r.stages)),
                _fmt(min(s.theta_ent_min for s in r.stages)),
            ]
            monitors = [s.monitor for s in r.stages if s.monitor is not None]
            if monitors:
                worst = {
                    "min_mean_rho": min(m.min_mean_rho for m in monitors),
                    "convex_min_coeff": min(m.convex_min_coeff for m in monitors),
                    "convex_sum_err": max(m.convex_sum_err for m in monitors),
                    "entropy_slack": max(m.entropy_slack for m in monitors),
                    "energy_slack": max(m.energy_slack for m in monitors),
                    "cell_energy_slack": max(m.cell_energy_slack for m in monitors),
                    "j_copy_error": max(m.j_copy_error for m in monitors),
                }
                base.extend(_fmt(worst[c]) for c in _MONITOR_COLS)
            else:
                base.extend("nan" for _ in _MONITOR_COLS)
            fh.write(",".join(base) + "\n")


def write_metadata(path: Path, payload: dict):
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def parse_config_file(path: Path) -> dict:
    """Flat key = value lines; '#' starts a comment."""
    out = {}
    for ln, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


_CONFIG_KEYS = {
    "case": str,
    "p": int,
    "n_elem": str,
    "t_end": float,
    "cfl": float,
    "a_safety": float,
    "eps_pos": float,
    "boundary": str,
    "rk": str,
    "monitors": lambda s: s.lower() in ("1", "true", "yes", "on"),
    "density_limiter": str,
    "entropy_limiter": str,
    "out_dir": str,
}


def _merge_config(args) -> dict:
    cfg = {}
    if args.config is not None:
        raw = parse_config_file(Path(args.config))
        for key, value in raw.items():
            if key not in _CONFIG_KEYS:
                raise ValueError(f"unknown config key {key!r}")
            cfg[key] = _CONFIG_KEYS[key](value)
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            cfg[key] = flag
    cfg.setdefault("case", "manufactured")
    cfg.setdefault("p", 1)
    cfg.setdefault("n_elem", "16")
    cfg.setdefault("cfl", 0.9)
    cfg.setdefault("a_safety", 1.05)
    cfg.setdefault("eps_pos", 1e-12)
    cfg.setdefault("monitors", False)
    cfg.setdefault("density_limiter", "auto")
    cfg.setdefault("entropy_limiter", "auto")
    cfg.setdefault("out_dir", "out")
    for knob in ("density_limiter", "entropy_limiter"):
        if cfg[knob] not in ("auto", "on", "off"):
            raise ValueError(f"{knob} must be auto, on, or off, got {cfg[knob]!r}")
    return cfg


def _resolve_density(cfg, case) -> bool:
    mode = cfg["density_limiter"]
    if mode == "auto":
        return case.density_default
    return mode == "on"


def _resolve_entropy(cfg, case) -> bool:
    mode = cfg["entropy_limiter"]
    if mode == "auto":
        return case.entropy_default
    return mode == "on"


def _params_from_cfg(cfg, case) -> RunParams:
    return RunParams(
        cfl_safety=cfg["cfl"],
        a_safety=cfg["a_safety"],
        monitors=cfg["monitors"],
        limiter=LimiterConfig(
            eps_pos=cfg["eps_pos"],
            density_enabled=_resolve_density(cfg, case),
            entropy_enabled=_resolve_entropy(cfg, case),
        ),
    )


def _n_elem_list(spec) -> list[int]:
    if isinstance(spec, int):
        return [spec]
    vals = [int(tok) for tok in str(spec).split(",") if tok.strip()]
    if not vals or any(v < 2 for v in vals):
        raise ValueError(f"bad n_elem specification {spec!r}")
    return vals


def cmd_run(args) -> int:
    cfg = _merge_config(args)
    case = get_case(cfg["case"])
    meshes = _n_elem_list(cfg["n_elem"])
    if len(meshes) != 1:
        raise ValueError("run expects a single n_elem; use convergence for sweeps")
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    params = _params_from_cfg(cfg, case)
    basis, fieldv, reports, t_end = run_case(
        case,
        cfg["p"],
        meshes[0],
        t_end=cfg.get("t_end"),
        rk=cfg.get("rk"),
        params=params,
        boundary=cfg.get("boundary"),
    )
    write_solution_csv(out_dir / "solution.csv", basis, fieldv)
    write_steps_csv(out_dir / "steps.csv", reports)
    write_metadata(
        out_dir / "metadata.json",
        {
            "case": case.name,
            "p": cfg["p"],
            "n_elem": meshes[0],
            "t_end": t_end,
            "rk": cfg.get("rk") or default_scheme(cfg["p"]).name,
            "boundary": cfg.get("boundary") or case.boundary_default,
            "cfl": cfg["cfl"],
            "a_safety": cfg["a_safety"],
            "eps_pos": cfg["eps_pos"],
            "density_limiter": _resolve_density(cfg, case),
            "entropy_limiter": _resolve_entropy(cfg, case),
            "monitors": cfg["monitors"],
            "n_steps": len(reports),
            "kappa": case.model.kappa,
            "gamma": case.model.gamma,
        },
    )
    print(f"wrote {out_dir / 'solution.csv'} ({len(reports)} steps)")
    return 0


def cmd_convergence(args) -> int:
    cfg = _merge_config(args)
    case = get_case(cfg["case"])
    if case.exact is None:
        raise ValueError(f"case {case.name!r} has no exact solution to compare against")
    meshes = _n_elem_list(cfg["n_elem"])
    if len(meshes) < 2:
        raise ValueError("convergence expects at least two n_elem values")
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    prev = None
    for n_elem in meshes:
        basis, fieldv, _, t_end = run_case(
            case,
            cfg["p"],
            n_elem,
            t_end=cfg.get("t_end"),
            rk=cfg.get("rk"),
            params=_params_from_cfg(cfg, case),
            boundary=cfg.get("boundary"),
        )
        report = verify.error_norms(
            basis, fieldv, lambda x: case.exact(x, t_end), component="rho"
        )
        orders = (np.nan,) * 3 if prev is None else verify.orders_between(prev, report)
        rows.append((n_elem, fieldv.h, report, orders))
        prev = report

    table_path = out_dir / "convergence.csv"
    with open(table_path, "w", newline="\n") as fh:
        fh.write("n_elem,h,l1,l1_order,l2,l2_order,linf,linf_order\n")
        for n_elem, h, rep, orders in rows:
            fh.write(
                ",".join(
                    [
                        str(n_elem),
                        _fmt(h),
                        _fmt(rep.l1),
                        _fmt(orders[0]),
                        _fmt(rep.l2),
                        _fmt(orders[1]),
                        _fmt(rep.linf),
                        _fmt(orders[2]),
                    ]
                )
                + "\n"
            )
    header = f"{'n_elem':>7} {'h':>12} {'L1':>13} {'ord':>6} {'L2':>13} {'ord':>6} {'Linf':>13} {'ord':>6}"
    print(header)
    for n_elem, h, rep, orders in rows:
        def o(v):
            return "  --- " if np.isnan(v) else f"{v:6.2f}"
        print(
            f"{n_elem:>7} {h:>12.5e} {rep.l1:>13.5e} {o(orders[0])} "
            f"{rep.l2:>13.5e} {o(orders[1])} {rep.linf:>13.5e} {o(orders[2])}"
        )
    print(f"wrote {table_path}")
    write_metadata(
        out_dir / "metadata.json",
        {
            "case": case.name,
            "p": cfg["p"],
            "n_elem": meshes,
            "t_end": cfg.get("t_end") or case.t_end_default,
            "rk": cfg.get("rk") or default_scheme(cfg["p"]).name,
            "boundary": cfg.get("boundary") or case.boundary_default,
            "cfl": cfg["cfl"],
            "a_safety": cfg["a_safety"],
            "eps_pos": cfg["eps_pos"],
            "density_limiter": _resolve_density(cfg, case),
            "entropy_limiter": _resolve_entropy(cfg, case),
            "monitors": cfg["monitors"],
            "kappa": case.model.kappa,
            "gamma": case.model.gamma,
        },
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpdg",
        description="Lagrange-projection DG solver for 1d isentropic gas dynamics",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("convergence", cmd_convergence)):
        sp = sub.add_parser(name)
        sp.add_argument("--case", type=str.lower, choices=sorted(CASES), default=None)
        sp.add_argument("--p", type=int, default=None)
        sp.add_argument(
            "--n-elem", dest="n_elem", default=None,
            help="element count; comma list for convergence sweeps",
        )
        sp.add_argument("--t-end", dest="t_end", type=float, default=None)
        sp.add_argument("--cfl", type=float, default=None)
        sp.add_argument("--a-safety", dest="a_safety", type=float, default=None)
        sp.add_argument("--eps-pos", dest="eps_pos", type=float, default=None)
        sp.add_argument("--boundary", choices=("periodic", "farfield"), default=None)
        sp.add_argument("--rk", choices=sorted(SCHEMES), default=None)
        sp.add_argument("--monitors", action="store_true", default=False)
        sp.add_argument(
            "--density-limiter",
            dest="density_limiter",
            choices=("auto", "on", "off"),
            default=None,
            help="density envelope limiter (auto: per-case default)",
        )
        sp.add_argument(
            "--entropy-limiter",
            dest="entropy_limiter",
            choices=("auto", "on", "off"),
            default=None,
            help="total-energy ceiling limiter (auto: per-case default)",
        )
        sp.add_argument("--out-dir", dest="out_dir", default=None)
        sp.add_argument("--config", default=None, help="flat key = value file")
        sp.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, RuntimeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
