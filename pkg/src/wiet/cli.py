"""
Command-line experiment runner.

Usage::

    wiet run --scenario fig11_gain --config cfg.yaml --seed 7 --out results/
    wiet list_scenarios

The configuration is a YAML mapping of flat dotted keys, e.g.
``irs.ne: [64, 128]``.  Unknown keys, wrong types and out-of-range seeds are
rejected with the offending key and line.  Two generic keys select a sweep:
``sweep.name`` (a list-valued scenario key) and ``sweep.values``.

Exit codes: 0 success, 2 configuration error, 3 infeasible problem,
4 numerical failure.
"""

import argparse
import csv
import hashlib
import io
import json
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .irs import InfeasibleError as IrsInfeasible
from .numerics import NumericsError
from .resalloc import InfeasibleError as RaInfeasible
from .scenarios import ALIASES, REGISTRY, ConfigError, resolve

__all__ = ["main", "run", "list_scenarios", "load_config", "format_value", "write_csv",
           "ConfigError"]

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4


def list_scenarios():
    """Registry as ``{name: {"description", "keys"}}`` in sorted order."""
    return {n: {"description": REGISTRY[n].description, "keys": list(REGISTRY[n].keys)}
            for n in sorted(REGISTRY)}


# ----------------------------------------------------------------------------
# Configuration
# ----------------------------------------------------------------------------
def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_type(key, value, default, where):
    if key == "irs.mode":
        ok = isinstance(value, str) or (isinstance(value, list) and value
                                        and all(isinstance(x, str) for x in value))
    elif key == "irs.bits":
        ok = value is None or (isinstance(value, int) and not isinstance(value, bool)
                               and value >= 0)
    elif isinstance(default, list):
        kind = str if default and isinstance(default[0], str) else None
        ok = isinstance(value, list) and len(value) > 0 and all(
            isinstance(x, str) if kind else _is_num(x) for x in value)
    elif isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = _is_num(value) and math.isfinite(value)
    else:
        ok = isinstance(value, type(default))
    if not ok:
        want = "list" if isinstance(default, list) else type(default).__name__
        raise ConfigError(f"{where}: key '{key}' expects {want}, got {value!r}")
    return float(value) if isinstance(default, float) else value


def load_config(text, scenario, source="<config>"):
    """Parse and validate configuration text against a scenario.

    Returns
    -------
    cfg : dict
        Defaults overlaid with the validated entries.
    seed : int or None
        Seed given in the file, if any.
    """
    try:
        root = yaml.compose(text) if text and text.strip() else None
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f":{mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{source}{line}: invalid YAML ({getattr(exc, 'problem', exc)})")
    cfg = {k: (list(v) if isinstance(v, list) else v) for k, v in scenario.defaults.items()}
    seed = None
    if root is None:
        return cfg, seed
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError(f"{source}:{root.start_mark.line + 1}: top level must be a mapping")
    seen, sweep = set(), {}
    for knode, vnode in root.value:
        where = f"{source}:{knode.start_mark.line + 1}"
        key = knode.value
        if not isinstance(knode, yaml.ScalarNode):
            raise ConfigError(f"{where}: keys must be flat dotted names")
        if key in seen:
            raise ConfigError(f"{where}: duplicate key '{key}'")
        seen.add(key)
        value = yaml.safe_load(yaml.serialize(vnode))
        if key == "seed":
            seed = _check_seed(value, where)
        elif key in ("sweep.name", "sweep.values"):
            sweep[key] = (value, where)
        elif key in cfg:
            cfg[key] = _check_type(key, value, scenario.defaults[key], where)
        else:
            raise ConfigError(f"{where}: unknown key '{key}' for scenario '{scenario.name}' "
                              f"(valid: {', '.join(scenario.keys)})")
    if sweep:
        if set(sweep) != {"sweep.name", "sweep.values"}:
            missing = ({"sweep.name", "sweep.values"} - set(sweep)).pop()
            raise ConfigError(f"{source}: key '{missing}' is required with a sweep")
        (name, where), (values, vwhere) = sweep["sweep.name"], sweep["sweep.values"]
        if name not in cfg or not isinstance(scenario.defaults[name], list):
            raise ConfigError(f"{where}: key 'sweep.name' must name a list-valued key, got {name!r}")
        cfg[name] = _check_type(name, values, scenario.defaults[name], vwhere)
    return cfg, seed


def _check_seed(value, where="--seed"):
    if isinstance(value, bool) or not isinstance(value, int) or not (0 <= value < 2**64):
        raise ConfigError(f"{where}: key 'seed' must be an unsigned 64-bit integer, got {value!r}")
    return value


# ----------------------------------------------------------------------------
# Output
# ----------------------------------------------------------------------------
def format_value(v):
    """CSV cell text; floats carry 12 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def write_csv(path: Path, header, rows) -> str:
    """Write one table with LF endings; returns its SHA-256."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        if len(r) != len(header):
            raise ValueError("row width does not match header")
        w.writerow([format_value(v) for v in r])
    data = buf.getvalue().encode()
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def _check_finite(tables):
    # NaN marks "no feasible realisation"; infinities are failures
    for stem, (header, rows) in tables.items():
        for r in rows:
            for name, v in zip(header, r):
                if isinstance(v, (float, np.floating)) and math.isinf(v):
                    raise NumericsError(f"{stem}: non-finite value in column '{name}'")


def run(scenario_name, config_text="", seed=None, out_dir=".", source="<config>"):
    """Run a scenario and write its CSV tables and ``manifest.json``.

    Returns
    -------
    dict
        The manifest.
    """
    scenario = resolve(scenario_name)
    cfg, file_seed = load_config(config_text, scenario, source)
    seed = _check_seed(seed) if seed is not None else (file_seed if file_seed is not None else 0)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    tables = scenario.run(cfg, seed)
    wall = time.perf_counter() - t0
    _check_finite(tables)
    files = {}
    for stem in sorted(tables):
        header, rows = tables[stem]
        files[f"{stem}.csv"] = write_csv(out / f"{stem}.csv", header, rows)
    manifest = {
        "scenario": scenario.name,
        "requested": scenario_name,
        "seed": seed,
        "version": __version__,
        "wall_time_s": wall,
        "config": cfg,
        "files": files,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# ----------------------------------------------------------------------------
# Entry point
# ----------------------------------------------------------------------------
def _parser():
    p = argparse.ArgumentParser(prog="wiet", description="WIET experiment runner")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a named scenario")
    r.add_argument("--scenario", required=True)
    r.add_argument("--config", default=None, help="YAML file of dotted keys")
    r.add_argument("--seed", default=None, help="unsigned 64-bit seed")
    r.add_argument("--out", default=".", help="output directory")
    sub.add_parser("list_scenarios", help="print registered scenarios")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list_scenarios":
        for name, info in list_scenarios().items():
            print(f"{name}: {info['description']}")
            print(f"    keys: {', '.join(info['keys'])}")
        if ALIASES:
            print("aliases: " + ", ".join(f"{a} -> {b}" for a, b in sorted(ALIASES.items())))
        return EXIT_OK
    try:
        seed = None
        if args.seed is not None:
            try:
                seed = int(args.seed, 10)
            except ValueError:
                raise ConfigError(f"--seed: key 'seed' must be an unsigned 64-bit integer, "
                                  f"got {args.seed!r}")
        text, source = "", "<config>"
        if args.config is not None:
            try:
                text = Path(args.config).read_text()
            except OSError as exc:
                raise ConfigError(f"--config: cannot read {args.config} ({exc.strerror})")
            source = args.config
        manifest = run(args.scenario, text, seed, args.out, source)
    except (RaInfeasible, IrsInfeasible) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NumericsError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # model constructors reject out-of-range parameter values
        print(f"config error: invalid parameter value ({exc})", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{manifest['scenario']}: wrote {', '.join(manifest['files'])} to {args.out} "
          f"in {manifest['wall_time_s']:.1f} s")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
