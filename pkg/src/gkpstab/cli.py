"""Command-line entry point: ``gkpstab run | describe | version``.

Runs are configured by an INI file (see README) whose keys can be overridden
by flags. All physics parameters are dimensionless products such as
``kappa dt`` or ``gamma1 t_cd``.
"""
import argparse
import configparser
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, experiments as ex, fock, gkp, protocols as pr
from .errors import ConfigError, GkpStabError

MODES = ("fig3-loss", "fig3-dephasing", "fig4-decay", "fig4-dephasing",
         "converge", "wigner", "stabilizer-check")
SWEEP_KIND = {"fig3-loss": "loss", "fig3-dephasing": "dephasing",
              "fig4-decay": "decay", "fig4-dephasing": "ancilla-dephasing"}
# config key -> (section, parser)
KEYS = {
    "mode": ("run", str), "output": ("run", str), "workers": ("run", int),
    "dim": ("hilbert", int), "trunc_tol": ("hilbert", float),
    "epsilon": ("code", "floats"), "delta": ("code", "floats"), "lattice": ("code", float),
    "protocols": ("protocol", "strs"), "variant": ("protocol", str),
    "st_order": ("protocol", "ints"),
    "rates": ("noise", "floats"), "n_rounds": ("noise", int), "n_pairs": ("run", int),
    "grid": ("wigner", "floats"),
}


@dataclass
class RunConfig:
    mode: str
    epsilon: list
    output: str = "gkpstab-out"
    workers: int = 1
    dim: int = None
    trunc_tol: float = 1e-6
    lattice: float = gkp.L_SQUARE
    protocols: list = field(default_factory=lambda: ["sBs"])
    variant: str = "autonomous"
    st_order: tuple = (0, 1)
    rates: list = field(default_factory=list)
    n_rounds: int = 200
    n_pairs: int = 50
    grid: list = field(default_factory=lambda: [-5.0, 5.0, 41])

    def params(self, eps):
        return gkp.GkpParams.from_epsilon(eps, self.lattice)

    def hilbert(self, eps):
        dim = self.dim or gkp.recommended_dim(self.params(eps))
        return fock.HilbertConfig(dim, self.trunc_tol)


def _parse_value(kind, text):
    if kind in ("floats", "ints", "strs"):
        items = [s.strip() for s in text.split(",") if s.strip()]
        conv = {"floats": float, "ints": int, "strs": str}[kind]
        return [conv(s) for s in items]
    return kind(text)


def _line_of(path, key):
    try:
        with open(path) as fh:
            for i, line in enumerate(fh, 1):
                if line.split("=")[0].strip() == key:
                    return i
    except OSError:
        pass
    return None


def load_config(path=None, overrides=None):
    """Read an INI config, apply flag overrides and validate.

    Raises ``ConfigError`` with the offending line when it can be located.
    """
    raw = {}
    if path:
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as err:
            raise ConfigError(f"cannot read config {path}: {err}") from err
        for section in cp.sections():
            for key, text in cp.items(section):
                if key not in KEYS:
                    line = _line_of(path, key)
                    raise ConfigError(f"{path}:{line}: unknown key {key!r}")
                if KEYS[key][0] != section:
                    line = _line_of(path, key)
                    raise ConfigError(
                        f"{path}:{line}: key {key!r} belongs in [{KEYS[key][0]}]")
                try:
                    raw[key] = _parse_value(KEYS[key][1], text)
                except ValueError as err:
                    line = _line_of(path, key)
                    raise ConfigError(f"{path}:{line}: bad value for {key!r}: {err}") from err
    for key, val in (overrides or {}).items():
        if val is not None:
            raw[key] = val
    return validate(raw, path)


def validate(raw, path=None):
    where = lambda k: f"{path}:{_line_of(path, k)}: " if path else ""
    mode = raw.get("mode")
    if mode not in MODES:
        raise ConfigError(f"{where('mode')}mode must be one of {', '.join(MODES)}, got {mode!r}")
    if ("epsilon" in raw) == ("delta" in raw):
        raise ConfigError("give exactly one of epsilon or delta")
    lattice = raw.get("lattice", gkp.L_SQUARE)
    if "delta" in raw:
        eps = [float(np.sinh(d ** 2) * lattice) for d in raw.pop("delta")]
    else:
        eps = raw.pop("epsilon")
    if not eps or any(not e > 0 for e in eps):
        raise ConfigError(f"{where('epsilon')}epsilon values must be positive")
    cfg = RunConfig(mode=mode, epsilon=[float(e) for e in eps],
                    **{k: v for k, v in raw.items() if k not in ("mode",)})
    cfg.st_order = tuple(cfg.st_order)
    if cfg.variant not in ("autonomous", "feedback"):
        raise ConfigError(f"{where('variant')}variant must be autonomous or feedback")
    if cfg.variant == "feedback":
        cfg.protocols = [p if p.endswith("-fb") else p + "-fb" for p in cfg.protocols]
    for name in cfg.protocols:
        base = name[:-3] if name.endswith("-fb") else name
        if base not in pr.PROTOCOLS:
            raise ConfigError(f"{where('protocols')}unknown protocol {name!r}")
        if name.endswith("-fb") and base == "sBs":
            raise ConfigError("feedback variant is defined for BsB and ST only")
    if mode in SWEEP_KIND:
        if not cfg.rates:
            raise ConfigError(f"{where('rates')}mode {mode} needs a non-empty rate grid")
        if any(r < 0 for r in cfg.rates):
            raise ConfigError(f"{where('rates')}rates must be non-negative")
        if mode.startswith("fig3") and any(p.endswith("-fb") for p in cfg.protocols):
            raise ConfigError("feedback variants apply to ancilla-noise sweeps only")
    if cfg.dim is not None and cfg.dim < 2:
        raise ConfigError(f"{where('dim')}dim must be >= 2")
    if cfg.workers < 1:
        raise ConfigError(f"{where('workers')}workers must be >= 1")
    if mode == "wigner" and len(cfg.grid) != 3:
        raise ConfigError(f"{where('grid')}grid is 'min, max, points'")
    return cfg


def plan(cfg):
    """Parameter points, memory estimate and warnings, without computing."""
    lines, warnings = [], []
    points = []
    if cfg.mode in SWEEP_KIND:
        points = ex.sweep_points(cfg.protocols, cfg.epsilon, cfg.rates)
    else:
        points = [(cfg.protocols[0], e, None) for e in cfg.epsilon]
    dims = {e: cfg.hilbert(e).dim for e in cfg.epsilon}
    ancilla = cfg.mode.startswith("fig4")
    mem = max((4 if ancilla else 1) * 16 * d * d * 12 for d in dims.values())
    for e in cfg.epsilon:
        params = cfg.params(e)
        rec = gkp.recommended_dim(params)
        if dims[e] < rec:
            warnings.append(f"epsilon={e}: dim={dims[e]} below recommended {rec}; "
                            f"lifetimes will be truncation limited")
        for name in cfg.protocols:
            base = name[:-3] if name.endswith("-fb") else name
            need = pr.superlattice_min_dim(pr.superlattice_constant(base, params.eps))
            if dims[e] < need:
                warnings.append(f"epsilon={e}: dim={dims[e]} too small for the {base} "
                                f"superlattice check (needs {need})")
        if e > 0.25:
            warnings.append(f"epsilon={e}: superlattice cell is small, confinement is poor")
    lines.append(f"mode: {cfg.mode}")
    lines.append(f"points: {len(points)}")
    for p in points:
        lines.append(f"  protocol={p[0]} epsilon={p[1]} dim={dims[p[1]]}"
                     + (f" rate={p[2]}" if p[2] is not None else ""))
    lines.append(f"memory estimate per worker: {mem / 2 ** 20:.0f} MiB")
    return points, lines, warnings


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _write_csv(path, columns, rows):
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])
    os.replace(tmp, path)


def _manifest(cfg, extra):
    doc = {
        "code_version": __version__,
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(cfg).items()},
        "cutoff": {str(e): cfg.hilbert(e).dim for e in cfg.epsilon},
        "trunc_tol": cfg.trunc_tol,
        "integrator": {"idle": "exact closed form", "ancilla_gates": "exact closed form",
                       "lindblad_rtol": 1e-10, "lindblad_atol": 1e-12},
        "fit": {"skip_rounds": max(5, cfg.n_rounds // 2), "min_decay": 0.2, "r2_min": 0.95},
    }
    doc.update(extra)
    return doc


def _point_job(args):
    cfg, point = args
    proto, eps, rate = point
    kind = SWEEP_KIND[cfg.mode]
    fn = ex.sweep_fig3 if cfg.mode.startswith("fig3") else ex.sweep_fig4
    rows = fn([proto], [eps], [rate], kind, cfg.n_rounds, cfg.dim, trunc_tol=cfg.trunc_tol)
    return point, rows[0]


def _run_sweep(cfg, csv_path, man_path, resume):
    points, _, _ = plan(cfg)
    done = {}
    if resume and os.path.exists(man_path) and os.path.exists(csv_path):
        with open(man_path) as fh:
            completed = {tuple(k) for k in json.load(fh).get("completed", [])}
        with open(csv_path) as fh:
            for row in csv.DictReader(fh):
                key = (row["protocol"], float(row["epsilon"]), float(row["rate_value"]))
                if key in completed:
                    done[key] = row
    started = time.time()

    def record(key, row):
        done[key] = row
        ordered = [done[k] for k in map(_key, points) if k in done]
        _write_csv(csv_path, ex.CSV_COLUMNS, ordered)
        with open(man_path, "w") as fh:
            json.dump(_manifest(cfg, {"completed": [list(k) for k in done],
                                      "started": started}), fh, indent=1)

    todo = [p for p in points if _key(p) not in done]
    if cfg.workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            for point, row in pool.map(_point_job, [(cfg, p) for p in todo]):
                record(_key(point), row)
    else:
        for p in todo:
            point, row = _point_job((cfg, p))
            record(_key(point), row)
    rows = [done[_key(p)] for p in points]
    with open(man_path, "w") as fh:
        json.dump(_manifest(cfg, {"completed": [list(_key(p)) for p in points],
                                  "started": started, "finished": time.time()}), fh, indent=1)
    return all(r["status"].startswith("ok") for r in rows)


def _key(point):
    return (point[0], float(point[1]), float(point[2]))


def run(cfg, resume=False, out=sys.stdout):
    """Execute a validated config; returns the exit status."""
    os.makedirs(cfg.output, exist_ok=True)
    csv_path = os.path.join(cfg.output, "results.csv")
    man_path = os.path.join(cfg.output, "manifest.json")
    if cfg.mode in SWEEP_KIND:
        ok = _run_sweep(cfg, csv_path, man_path, resume)
        print(f"wrote {csv_path}", file=out)
        return 0 if ok else 2
    rows, columns = [], None
    if cfg.mode == "stabilizer-check":
        columns = ("epsilon", "dim", "axis", "mu", "residual", "dark_residual", "nbar")
        for e in cfg.epsilon:
            params, hc = cfg.params(e), cfg.hilbert(e)
            res = gkp.stabilizer_residuals(params, hc)
            dark = gkp.dark_mode_residuals(params, hc)
            for (axis, mu), v in res.items():
                nbar = fock.mean_number(gkp.make_gkp_state(mu, params, hc))
                rows.append({"epsilon": e, "dim": hc.dim, "axis": axis, "mu": mu,
                             "residual": v, "dark_residual": dark[(axis, mu)], "nbar": nbar})
                print(f"eps={e} T_{axis}|{mu}>: residual {v:.2e}, "
                      f"dark-mode residual {dark[(axis, mu)]:.2e}", file=out)
    elif cfg.mode == "converge":
        columns = ("protocol", "epsilon", "pair", "T_x", "T_p", "nbar", "leakage")
        for e in cfg.epsilon:
            for name in cfg.protocols:
                for k, tx, tp, nb, lk in ex.converge(name, cfg.params(e), cfg.hilbert(e),
                                                     cfg.n_pairs):
                    rows.append({"protocol": name, "epsilon": e, "pair": k, "T_x": tx,
                                 "T_p": tp, "nbar": nb, "leakage": lk})
                print(f"{name} eps={e}: <T_x>={rows[-1]['T_x']:.4f} "
                      f"<T_p>={rows[-1]['T_p']:.4f} after {cfg.n_pairs} pairs", file=out)
    elif cfg.mode == "wigner":
        columns = ("epsilon", "mu", "x", "p", "W")
        lo, hi, n = cfg.grid
        xs = np.linspace(lo, hi, int(n))
        for e in cfg.epsilon:
            params, hc = cfg.params(e), cfg.hilbert(e)
            psi = gkp.make_gkp_state(0, params, hc)
            W = ex.wigner(psi, xs, xs, tol=cfg.trunc_tol)
            for i, p in enumerate(xs):
                for j, x in enumerate(xs):
                    rows.append({"epsilon": e, "mu": 0, "x": float(x), "p": float(p),
                                 "W": float(W[i, j])})
    _write_csv(csv_path, columns, rows)
    with open(man_path, "w") as fh:
        json.dump(_manifest(cfg, {"finished": time.time()}), fh, indent=1)
    print(f"wrote {csv_path}", file=out)
    return 0


def _add_common(p):
    p.add_argument("config", nargs="?", help="INI config file")
    p.add_argument("--mode")
    p.add_argument("--epsilon", type=lambda s: [float(v) for v in s.split(",")])
    p.add_argument("--delta", type=lambda s: [float(v) for v in s.split(",")])
    p.add_argument("--protocol", dest="protocols", type=lambda s: s.split(","))
    p.add_argument("--variant")
    p.add_argument("--rates", type=lambda s: [float(v) for v in s.split(",") if v])
    p.add_argument("--dim", type=int)
    p.add_argument("--trunc-tol", dest="trunc_tol", type=float)
    p.add_argument("--n-rounds", dest="n_rounds", type=int)
    p.add_argument("--n-pairs", dest="n_pairs", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--output", "-o")


def main(argv=None):
    ap = argparse.ArgumentParser(prog="gkpstab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment")
    _add_common(p_run)
    p_run.add_argument("--resume", action="store_true", help="skip completed sweep points")
    _add_common(sub.add_parser("describe", help="list the planned points"))
    sub.add_parser("version", help="print the package version")
    args = ap.parse_args(argv)
    if args.command == "version":
        print(__version__)
        return 0
    keys = ("mode", "epsilon", "delta", "protocols", "variant", "rates", "dim", "trunc_tol",
            "n_rounds", "n_pairs", "workers", "output")
    overrides = {k: getattr(args, k) for k in keys}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    if args.command == "describe":
        _, lines, warnings = plan(cfg)
        print("\n".join(lines))
        for w in warnings:
            print(f"warning: {w}")
        return 0
    try:
        return run(cfg, resume=args.resume)
    except GkpStabError as err:
        print(f"run failed: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
