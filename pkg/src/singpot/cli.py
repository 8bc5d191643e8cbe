"""Command-line front end.

    singpot <command> --config run.yaml [--out results.csv] [--format csv|json]

Commands: fa-eval, q-eval, gauss-identity, solve-ball, solve-general, verify.
Exit status is 0 on success, 1 for configuration or input errors and 2 for
numerical failures (including failed ``verify`` checks).

Numerical modules are imported lazily so that ``SINGPOT_NUM_THREADS`` can
set the BLAS thread count before numpy loads.
"""

from __future__ import annotations

import argparse
import ast
import json
import os
import sys
from dataclasses import dataclass, field

import yaml

COMMANDS = ("fa-eval", "q-eval", "gauss-identity", "solve-ball", "solve-general", "verify")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2

_ORDER_KEYS = ("sphere", "flat", "polar_r", "polar_psi")
_TOL_KEYS = ("rel_tol", "abs_tol", "max_terms", "tail_window")
_TOP_KEYS = ("problem", "m", "n", "alpha", "R", "orders", "tolerance", "data", "points",
             "fa", "pole", "output")


class ConfigError(Exception):
    code = "cli.config"

    def __init__(self, field_name: str, message: str, line=None):
        self.field = field_name
        self.line = line
        where = f"line {line}: " if line else ""
        super().__init__(f"{where}{field_name}: {message}")


# --------------------------------------------------------------------------
# inline data expressions: coordinates, numbers, + - * and parentheses
# --------------------------------------------------------------------------

def compile_expression(text: str, m: int):
    """Compile an expression in x1..xm into a function of points (..., m)."""
    try:
        tree = ast.parse(str(text), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression {text!r}") from exc

    def check(node):
        if isinstance(node, ast.Expression):
            check(node.body)
        elif isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub, ast.Mult)):
            check(node.left)
            check(node.right)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
            check(node.operand)
        elif isinstance(node, ast.Constant) and type(node.value) in (int, float):
            pass
        elif isinstance(node, ast.Name):
            if not (node.id.startswith("x") and node.id[1:].isdigit() and 1 <= int(node.id[1:]) <= m):
                raise ValueError(f"unknown name {node.id!r} (use x1..x{m})")
        else:
            raise ValueError(f"construct {type(node).__name__} not allowed in {text!r}")

    check(tree)

    def value(node, p):
        if isinstance(node, ast.BinOp):
            a, b = value(node.left, p), value(node.right, p)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            return a * b
        if isinstance(node, ast.UnaryOp):
            v = value(node.operand, p)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Constant):
            return float(node.value) + 0.0 * p[..., 0]
        return p[..., int(node.id[1:]) - 1]

    import numpy as np
    return lambda p: value(tree.body, np.asarray(p, dtype=float))


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    problem: str
    m: int = 3
    alpha: tuple = (0.3,)
    R: float = 1.0
    orders: tuple = ()          # sorted (key, value) pairs
    tolerance: tuple = ()
    data: object = None         # builtin name, or sorted (key, value) pairs
    points: tuple = ()
    fa: tuple = ()
    pole: tuple = ()
    output: tuple = ()
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n(self) -> int:
        return len(self.alpha)

    def to_dict(self) -> dict:
        out = {"problem": self.problem, "m": self.m, "n": self.n, "alpha": list(self.alpha),
               "R": self.R}
        for name in ("orders", "tolerance", "fa", "output"):
            if getattr(self, name):
                out[name] = {k: (list(v) if isinstance(v, tuple) else v)
                             for k, v in getattr(self, name)}
        if self.data is not None:
            out["data"] = self.data if isinstance(self.data, str) else {
                k: (list(v) if isinstance(v, tuple) else v) for k, v in self.data}
        if self.points:
            out["points"] = [list(p) for p in self.points]
        if self.pole:
            out["pole"] = list(self.pole)
        return out


def _line_map(text: str) -> dict:
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("config", f"not valid YAML ({getattr(exc, 'problem', exc)})",
                          mark.line + 1 if mark else None)
    lines = {}

    def walk(n, path):
        lines.setdefault(path, n.start_mark.line + 1)
        if isinstance(n, yaml.MappingNode):
            for k, v in n.value:
                lines[path + (k.value,)] = k.start_mark.line + 1
                walk(v, path + (k.value,))
        elif isinstance(n, yaml.SequenceNode):
            for i, v in enumerate(n.value):
                walk(v, path + (i,))

    if node is not None:
        walk(node, ())
    return lines


def _num(value, name, line, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}", line)
    if kind is int and int(value) != value:
        raise ConfigError(name, f"expected an integer, got {value!r}", line)
    return kind(value)


def _vector(value, name, lines, path, length=None):
    line = lines.get(path)
    if not isinstance(value, (list, tuple)):
        raise ConfigError(name, "expected a list of numbers", line)
    out = tuple(_num(v, f"{name}[{i}]", lines.get(path + (i,), line)) for i, v in enumerate(value))
    if length is not None and len(out) != length:
        raise ConfigError(name, f"expected {length} entries, got {len(out)}", line)
    return out


def parse_config(raw, command: str | None = None, lines: dict | None = None) -> RunConfig:
    """Validate a mapping (as loaded from YAML) into a :class:`RunConfig`."""
    lines = lines or {}
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a mapping", 1)
    unknown = sorted(set(raw) - set(_TOP_KEYS))
    if unknown:
        raise ConfigError(unknown[0], "unknown field", lines.get((unknown[0],)))
    ln = lambda *p: lines.get(p)
    problem = raw.get("problem", command)
    if command is not None and problem != command:
        raise ConfigError("problem", f"config is for {problem!r} but command is {command!r}",
                          ln("problem"))
    if problem not in COMMANDS:
        raise ConfigError("problem", f"must be one of {', '.join(COMMANDS)}", ln("problem"))

    m = _num(raw.get("m", 3), "m", ln("m"), int)
    alpha = _vector(raw.get("alpha", [0.3]), "alpha", lines, ("alpha",))
    if "n" in raw and _num(raw["n"], "n", ln("n"), int) != len(alpha):
        raise ConfigError("n", f"n = {raw['n']} but alpha has {len(alpha)} entries", ln("n"))
    R = _num(raw.get("R", 1.0), "R", ln("R"))
    from .kernels import SingularParams
    try:
        SingularParams(m, alpha)
    except Exception as exc:
        raise ConfigError("alpha" if m >= 3 else "m", str(exc), ln("alpha") or ln("m"))
    if not R > 0:
        raise ConfigError("R", "radius must be positive", ln("R"))

    orders = raw.get("orders", {})
    if isinstance(orders, int) and not isinstance(orders, bool):
        orders = {"sphere": orders, "flat": orders}
    if not isinstance(orders, dict):
        raise ConfigError("orders", "expected an integer or a mapping", ln("orders"))
    for k, v in orders.items():
        if k not in _ORDER_KEYS:
            raise ConfigError(f"orders.{k}", f"unknown order (use {', '.join(_ORDER_KEYS)})",
                              ln("orders", k))
        if _num(v, f"orders.{k}", ln("orders", k), int) < 2:
            raise ConfigError(f"orders.{k}", "order must be at least 2", ln("orders", k))

    tol = raw.get("tolerance", {})
    if not isinstance(tol, dict):
        raise ConfigError("tolerance", "expected a mapping", ln("tolerance"))
    for k, v in tol.items():
        if k not in _TOL_KEYS:
            raise ConfigError(f"tolerance.{k}", f"unknown tolerance (use {', '.join(_TOL_KEYS)})",
                              ln("tolerance", k))
        kind = int if k in ("max_terms", "tail_window") else float
        if not _num(v, f"tolerance.{k}", ln("tolerance", k), kind) > 0:
            raise ConfigError(f"tolerance.{k}", "must be positive", ln("tolerance", k))

    cfg = dict(problem=problem, m=m, alpha=alpha, R=R,
               orders=tuple(sorted((k, int(v)) for k, v in orders.items())),
               tolerance=tuple(sorted(tol.items())), lines=lines)

    data = raw.get("data")
    if data is not None:
        if isinstance(data, dict):
            for k in data:
                if k not in ("phi", "tau", "expr"):
                    raise ConfigError(f"data.{k}", "unknown field (use expr, or phi and tau)",
                                      ln("data", k))
            items = []
            for k, v in data.items():
                items.append((k, tuple(str(e) for e in v) if isinstance(v, list) else str(v)))
            cfg["data"] = tuple(sorted(items))
        elif isinstance(data, str):
            cfg["data"] = data
        else:
            raise ConfigError("data", "expected a built-in name or an expression table", ln("data"))

    out = raw.get("output", {})
    if isinstance(out, str):
        out = {"path": out}
    if not isinstance(out, dict) or set(out) - {"path", "format"}:
        raise ConfigError("output", "expected a mapping with path and format", ln("output"))
    if out.get("format", "csv") not in ("csv", "json"):
        raise ConfigError("output.format", "must be csv or json", ln("output", "format"))
    cfg["output"] = tuple(sorted(out.items()))

    points = raw.get("points", [])
    if not isinstance(points, list):
        raise ConfigError("points", "expected a list of points", ln("points"))

    if problem == "fa-eval":
        fa = raw.get("fa")
        if not isinstance(fa, dict) or set(fa) != {"a", "b", "c"}:
            raise ConfigError("fa", "expected a mapping with a, b and c", ln("fa"))
        a = _num(fa["a"], "fa.a", ln("fa", "a"))
        b = _vector(fa["b"], "fa.b", lines, ("fa", "b"))
        c = _vector(fa["c"], "fa.c", lines, ("fa", "c"), len(b))
        cfg["fa"] = (("a", a), ("b", b), ("c", c))
        pts = tuple(_vector(p, f"points[{i}]", lines, ("points", i), len(b))
                    for i, p in enumerate(points))
        for i, p in enumerate(pts):
            if any(v > 0 for v in p):
                raise ConfigError(f"points[{i}]", "fa-eval needs nonpositive arguments",
                                  ln("points", i))
    else:
        pts = tuple(_vector(p, f"points[{i}]", lines, ("points", i), m)
                    for i, p in enumerate(points))
    cfg["points"] = pts

    if problem == "q-eval":
        if "pole" not in raw:
            raise ConfigError("pole", "q-eval needs a pole", None)
        cfg["pole"] = _vector(raw["pole"], "pole", lines, ("pole",), m)

    result = RunConfig(**cfg)
    _check_region(result)
    return result


def _check_region(cfg: RunConfig):
    n = cfg.n
    lines = cfg.lines
    if cfg.problem in ("fa-eval", "verify"):
        return
    if not cfg.points:
        raise ConfigError("points", f"{cfg.problem} needs at least one point", lines.get(("points",)))
    dom = _domain(cfg)
    for i, p in enumerate(cfg.points):
        line = lines.get(("points", i))
        if any(v < 0 for v in p[:n]):
            raise ConfigError(f"points[{i}]", "singular coordinates must be nonnegative", line)
        if cfg.problem == "q-eval" and p == cfg.pole:
            raise ConfigError(f"points[{i}]", "coincides with the pole", line)
        if cfg.problem == "gauss-identity":
            cls = dom.classify(p, tol=1e-12)
            if cls == "boundary" and abs(sum(v * v for v in p) ** 0.5 - cfg.R) > 1e-12 * cfg.R:
                raise ConfigError(f"points[{i}]", "points on the flat patches are not supported", line)
        if cfg.problem in ("solve-ball", "solve-general"):
            if dom.classify(p) != "interior" or sum(v * v for v in p) == 0:
                raise ConfigError(f"points[{i}]", "must lie strictly inside the domain", line)
    if cfg.problem == "q-eval" and any(v < 0 for v in cfg.pole[:n]):
        raise ConfigError("pole", "singular coordinates must be nonnegative", lines.get(("pole",)))
    if cfg.problem in ("solve-ball", "solve-general"):
        if cfg.data is None:
            raise ConfigError("data", f"{cfg.problem} needs boundary data", None)
        try:
            boundary_data(cfg).check_matching(dom)
        except (ValueError, TypeError) as exc:
            raise ConfigError("data", str(exc), lines.get(("data",)))


def load_config(path, command: str | None = None) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}")
    lines = _line_map(text)
    return parse_config(yaml.safe_load(text), command, lines)


def _domain(cfg):
    from .geometry import OctantBallDomain
    from .kernels import SingularParams
    return OctantBallDomain(cfg.R, SingularParams(cfg.m, cfg.alpha))


def _control(cfg):
    from .specialfun import SeriesControl
    return SeriesControl(**dict(cfg.tolerance))


def _orders(cfg):
    from .potentials import QuadOrders
    return QuadOrders(**dict(cfg.orders))


def boundary_data(cfg):
    from .dirichlet import BoundaryData, builtin_data
    dom = _domain(cfg)
    if isinstance(cfg.data, str):
        return builtin_data(cfg.data, dom)
    table = dict(cfg.data)
    if "expr" in table:
        if set(table) != {"expr"}:
            raise ValueError("use either expr or phi/tau, not both")
        return BoundaryData.from_function(compile_expression(table["expr"], cfg.m), cfg.n)
    if set(table) != {"phi", "tau"}:
        raise ValueError("inline data needs both phi and tau")
    tau = table["tau"]
    if isinstance(tau, str):
        tau = (tau,)
    if len(tau) != cfg.n:
        raise ValueError(f"need {cfg.n} tau expressions, got {len(tau)}")
    return BoundaryData(compile_expression(table["phi"], cfg.m),
                        tuple(compile_expression(t, cfg.m) for t in tau))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _run_fa(cfg):
    import numpy as np
    from .lauricella import fa_eval
    from .specialfun import SeriesControl
    fa = dict(cfg.fa)
    ctrl = _control(cfg)
    fine = SeriesControl(rel_tol=min(ctrl.rel_tol, 1e-15), max_terms=ctrl.max_terms)
    cols = [f"y{i + 1}" for i in range(len(fa["b"]))] + ["value", "error_estimate", "flags"]
    rows = []
    for y in cfg.points:
        v = float(fa_eval(fa["a"], fa["b"], fa["c"], np.array([y]), ctrl)[0])
        ref = float(fa_eval(fa["a"], fa["b"], fa["c"], np.array([y]), fine)[0])
        rows.append(list(y) + [v, abs(v - ref), ""])
    return cols, rows, {}


def _run_q(cfg):
    import numpy as np
    from .kernels import SingularParams, q_n
    from .specialfun import SeriesControl
    sp = SingularParams(cfg.m, cfg.alpha)
    ctrl = _control(cfg)
    fine = SeriesControl(rel_tol=min(ctrl.rel_tol, 1e-15), max_terms=ctrl.max_terms)
    pole = np.array(cfg.pole)
    cols = [f"x{i + 1}" for i in range(cfg.m)] + ["value", "error_estimate", "flags"]
    rows = []
    for x in cfg.points:
        v = float(q_n(pole, np.array(x), sp, ctrl))
        rows.append(list(x) + [v, abs(v - float(q_n(pole, np.array(x), sp, fine))), ""])
    return cols, rows, {}


def _run_gauss(cfg):
    import numpy as np
    from .potentials import gauss_w1
    dom = _domain(cfg)
    shift = {"interior": 1.0, "boundary": 0.5, "exterior": 0.0}
    cols = [f"x{i + 1}" for i in range(cfg.m)] + ["classification", "w1", "i_x", "expected",
                                                  "residual", "flags"]
    rows = []
    for x in cfg.points:
        cls = dom.classify(x)
        w1, i_x = gauss_w1(dom, np.array(x), cls, _orders(cfg), _control(cfg))
        rows.append(list(x) + [cls, w1, i_x, i_x - shift[cls], w1 - (i_x - shift[cls]), ""])
    return cols, rows, {}


def _half(orders):
    from .potentials import QuadOrders
    return QuadOrders(max(4, orders.sphere // 2), max(4, orders.flat // 2),
                      max(4, orders.polar_r // 2), max(4, orders.polar_psi // 2))


def _run_ball(cfg):
    import numpy as np
    from .dirichlet import solve_ball
    dom, data, orders, ctrl = _domain(cfg), boundary_data(cfg), _orders(cfg), _control(cfg)
    cols = [f"xi{i + 1}" for i in range(cfg.m)] + ["value", "error_estimate", "flags"]
    rows = []
    info = {}
    for xi in cfg.points:
        u, info = solve_ball(data, np.array(xi), dom, orders, ctrl, return_info=True)
        coarse = solve_ball(data, np.array(xi), dom, _half(orders), ctrl)
        flags = "near_boundary" if info["flags"]["near_boundary"] else ""
        rows.append(list(xi) + [u, abs(u - coarse), flags])
    meta = {"flat_path": info.get("flat_path"), "flat_path_gap": info.get("flat_path_gap"),
            "error_estimate": "difference to the same formula at half the quadrature orders"}
    return cols, rows, meta


def _run_general(cfg):
    import numpy as np
    from .dirichlet import solve_ball, solve_general
    dom, data, orders, ctrl = _domain(cfg), boundary_data(cfg), _orders(cfg), _control(cfg)
    pts = np.array(cfg.points)
    u = np.atleast_1d(solve_general(data, pts, dom, orders, ctrl))
    ref, info = solve_ball(data, pts, dom, orders, ctrl, return_info=True)
    ref = np.atleast_1d(ref)
    cols = [f"xi{i + 1}" for i in range(cfg.m)] + ["value", "error_estimate", "flags"]
    rows = [list(p) + [float(a), float(abs(a - b)), ""] for p, a, b in zip(cfg.points, u, ref)]
    meta = {"flat_path": info["flat_path"],
            "error_estimate": "difference to the explicit ball formula"}
    return cols, rows, meta


def _run_verify(cfg):
    from .verify import run_suites
    checks = run_suites(cfg.m, cfg.alpha, cfg.R, _orders(cfg))
    cols = ["suite", "check", "measured", "threshold", "passed", "seconds"]
    rows = [[c.suite, c.name, c.measured, c.threshold, "pass" if c.passed else "FAIL", c.seconds]
            for c in checks]
    return cols, rows, {"all_passed": all(c.passed for c in checks)}


_RUNNERS = {"fa-eval": _run_fa, "q-eval": _run_q, "gauss-identity": _run_gauss,
            "solve-ball": _run_ball, "solve-general": _run_general, "verify": _run_verify}


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_csv(fh, cols, rows):
    fh.write(",".join(cols) + "\n")
    for r in rows:
        fh.write(",".join(_fmt(v) for v in r) + "\n")


def run(cfg: RunConfig, out_path=None, fmt=None):
    """Run one command; returns (exit status, columns, rows, metadata)."""
    cols, rows, meta = _RUNNERS[cfg.problem](cfg)
    meta = {"command": cfg.problem, "config": cfg.to_dict(), **meta}
    opts = dict(cfg.output)
    out_path = out_path or opts.get("path")
    fmt = fmt or opts.get("format", "csv")
    if fmt == "json":
        doc = {"metadata": meta, "columns": cols,
               "results": [dict(zip(cols, r)) for r in rows]}
        text = json.dumps(doc, indent=2, allow_nan=True)
        if out_path:
            with open(out_path, "w") as fh:
                fh.write(text + "\n")
        else:
            sys.stdout.write(text + "\n")
    else:
        if out_path:
            with open(out_path, "w") as fh:
                write_csv(fh, cols, rows)
            with open(str(out_path) + ".meta.yaml", "w") as fh:
                yaml.safe_dump(meta, fh, sort_keys=False)
        else:
            write_csv(sys.stdout, cols, rows)
    status = EXIT_OK
    if cfg.problem == "verify" and not meta["all_passed"]:
        status = EXIT_NUMERICAL
    return status, cols, rows, meta


def _configure_threads():
    value = os.environ.get("SINGPOT_NUM_THREADS")
    if value is None:
        return
    if not value.isdigit() or int(value) < 1:
        raise ConfigError("SINGPOT_NUM_THREADS", f"expected a positive integer, got {value!r}")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = value


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="singpot", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="YAML run configuration (optional for verify)")
    ap.add_argument("--out", help="output path (default: standard output)")
    ap.add_argument("--format", choices=("csv", "json"))
    args = ap.parse_args(argv)
    try:
        _configure_threads()
        if args.config:
            cfg = load_config(args.config, args.command)
        elif args.command == "verify":
            cfg = parse_config({}, "verify")
        else:
            raise ConfigError("--config", f"{args.command} needs a configuration file")
        status, *_ = run(cfg, args.out, args.format)
        return status
    except ConfigError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        from .errors import DomainError, SingpotError
        if isinstance(exc, DomainError):
            print(f"error [{exc.code}]: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        if isinstance(exc, SingpotError):
            print(f"error [{exc.code}]: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        if isinstance(exc, (ArithmeticError, FloatingPointError, MemoryError)):
            print(f"error [cli.numerical]: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        raise


if __name__ == "__main__":
    sys.exit(main())
