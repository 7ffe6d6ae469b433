"""Command line front end.

Three subcommands:

* ``run``       simulate a scenario (optionally swept) and write hit rows
* ``analytic``  evaluate the closed-form predictions for the same config
* ``presets``   list the bundled experiment configurations

Configs are JSON documents with a ``schema_version`` tag; unknown keys are
rejected with their dotted location so typos fail fast instead of silently
running a default.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys

from .analysis import (
    AnalyticModelParams,
    multi_lru_all_hit,
    multi_lru_one_hit,
    single_lru_hit,
    two_cache_all_hit,
    two_cache_one_hit,
)
from .cache_core import POLICY_KINDS, PolicyKind
from .sim import (
    HIT_CSV_HEADER,
    Scenario,
    coverage_profile_for,
    run_experiment,
    sweep,
    write_hit_csv,
)
from .traffic import make_catalogue

__all__ = ["main", "ConfigError", "PRESET_NAMES", "preset_config"]

SCHEMA_VERSION = 1
DEFAULT_SEED = 1729

ANALYTIC_CSV_HEADER = ["r_b", "n_bs", "policy", "analytic_hit", "gamma", "alpha"]


class ConfigError(Exception):
    """Invalid configuration; message carries the offending location."""


_SCENARIO_KEYS = {f.name for f in dataclasses.fields(Scenario)}
_SNM_KEYS = {"mean_lifespan_sec", "volume_shape", "volume_min", "shape", "shape_peak"}
_POLICY_KEYS = {"kind", "q"}
_SWEEP_KEYS = {"axis", "values"}
_TOP_KEYS = {"schema_version", "scenario", "sweep", "output"}


def _reject_unknown(mapping: dict, allowed: set, where: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"unknown key '{where}{key}'")


def _build_policies(raw, where: str) -> tuple[PolicyKind, ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{where} must be a non-empty list")
    out = []
    for i, item in enumerate(raw):
        if isinstance(item, str):
            item = {"kind": item}
        if not isinstance(item, dict):
            raise ConfigError(f"{where}[{i}] must be a string or object")
        _reject_unknown(item, _POLICY_KEYS, f"{where}[{i}].")
        if "kind" not in item:
            raise ConfigError(f"{where}[{i}] is missing 'kind'")
        if item["kind"] not in POLICY_KINDS:
            raise ConfigError(f"{where}[{i}].kind: unknown policy {item['kind']!r}")
        try:
            out.append(PolicyKind(item["kind"], q=float(item.get("q", 1.0))))
        except ValueError as exc:
            raise ConfigError(f"{where}[{i}]: {exc}") from exc
    return tuple(out)


def build_scenario(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ConfigError("'scenario' must be an object")
    _reject_unknown(raw, _SCENARIO_KEYS, "scenario.")
    kwargs = dict(raw)
    if "window" in kwargs:
        win = kwargs["window"]
        if not isinstance(win, (list, tuple)) or len(win) != 2:
            raise ConfigError("scenario.window must be a [width, height] pair")
        kwargs["window"] = (float(win[0]), float(win[1]))
    if "policies" in kwargs:
        kwargs["policies"] = _build_policies(kwargs["policies"], "scenario.policies")
    if "snm_law" in kwargs and kwargs["snm_law"] is not None:
        law = kwargs["snm_law"]
        if not isinstance(law, dict):
            raise ConfigError("scenario.snm_law must be an object")
        _reject_unknown(law, _SNM_KEYS, "scenario.snm_law.")
        from .traffic import SnmLaw

        try:
            kwargs["snm_law"] = SnmLaw(**law)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"scenario.snm_law: {exc}") from exc
    try:
        return Scenario(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scenario: {exc}") from exc


def validate_config(cfg: dict) -> None:
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object")
    _reject_unknown(cfg, _TOP_KEYS, "")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version must be {SCHEMA_VERSION}, "
            f"got {cfg.get('schema_version')!r}"
        )
    if "scenario" not in cfg:
        raise ConfigError("config is missing 'scenario'")
    if "sweep" in cfg:
        sw = cfg["sweep"]
        if not isinstance(sw, dict):
            raise ConfigError("'sweep' must be an object")
        _reject_unknown(sw, _SWEEP_KEYS, "sweep.")
        if "axis" not in sw or "values" not in sw:
            raise ConfigError("sweep needs both 'axis' and 'values'")
        if sw["axis"] not in ("r_b", "gamma", "alpha", "q"):
            raise ConfigError(f"sweep.axis: unknown axis {sw['axis']!r}")
        if not isinstance(sw["values"], list) or not sw["values"]:
            raise ConfigError("sweep.values must be a non-empty list")


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return cfg


def apply_overrides(cfg: dict, overrides) -> None:
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        key, _, raw = item.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"override {item!r} has an empty key")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        if parts[0] not in _TOP_KEYS:
            parts = ["scenario"] + parts
        node = cfg
        for part in parts[:-1]:
            nxt = node.get(part)
            if nxt is None:
                nxt = node[part] = {}
            if not isinstance(nxt, dict):
                raise ConfigError(f"override {key!r}: {part!r} is not an object")
            node = nxt
        node[parts[-1]] = value


# ---------------------------------------------------------------------------
# Presets

_FIG4_RADII = [0.7979, 1.1284, 1.382, 1.5958, 1.7841, 1.9544]
_TABLE2_RADII = _FIG4_RADII + [2.1111, 2.2568]
_LATTICE_WINDOW = [12.727922061357855, 12.727922061357855]


def _cfg(scenario: dict, output: str, sweep_: dict | None = None) -> dict:
    cfg = {"schema_version": SCHEMA_VERSION, "scenario": scenario, "output": output}
    if sweep_ is not None:
        cfg["sweep"] = sweep_
    return cfg


def preset_config(name: str) -> dict:
    """A fresh config dict for the named preset."""
    if name == "fig3a_verif_one":
        return _cfg(
            {"f": 2000, "alpha": 0.05, "policies": ["multi_lru_one"],
             "duration": 40_000.0, "realizations": 10},
            "fig3a_verif_one.csv",
            {"axis": "r_b", "values": [0.6, 0.8, 1.0, 1.13, 1.3, 1.6, 2.0]},
        )
    if name == "fig3b_verif_all":
        return _cfg(
            {"f": 2000, "alpha": 0.05, "policies": ["multi_lru_all"],
             "duration": 40_000.0, "realizations": 10},
            "fig3b_verif_all.csv",
            {"axis": "r_b", "values": [0.6, 0.8, 1.0, 1.13, 1.3, 1.6, 2.0]},
        )
    if name == "fig4_ppp_alpha1":
        return _cfg(
            {"f": 10_000, "alpha": 0.01,
             "policies": ["single_lru", "multi_lru_one", "multi_lru_all"],
             "duration": 40_000.0, "realizations": 10},
            "fig4_ppp_alpha1.csv",
            {"axis": "r_b", "values": list(_FIG4_RADII)},
        )
    if name == "fig4_lattice_alpha1":
        return _cfg(
            {"placement": "lattice", "window": list(_LATTICE_WINDOW),
             "f": 10_000, "alpha": 0.01,
             "policies": ["single_lru", "multi_lru_one", "multi_lru_all"],
             "duration": 40_000.0, "realizations": 10},
            "fig4_lattice_alpha1.csv",
            {"axis": "r_b", "values": list(_FIG4_RADII)},
        )
    if name == "fig4_lattice_alpha5":
        return _cfg(
            {"placement": "lattice", "window": list(_LATTICE_WINDOW),
             "f": 10_000, "alpha": 0.05,
             "policies": ["single_lru", "multi_lru_one", "multi_lru_all"],
             "duration": 40_000.0, "realizations": 10},
            "fig4_lattice_alpha5.csv",
            {"axis": "r_b", "values": list(_FIG4_RADII)},
        )
    if name == "fig_qlru":
        return _cfg(
            {"f": 10_000, "k": 100, "alpha": None,
             "policies": ["q_multi_lru_all"],
             "duration": 40_000.0, "realizations": 10},
            "fig_qlru.csv",
            {"axis": "q", "values": [0.1, 0.25, 0.5, 0.75, 1.0]},
        )
    if name == "fig_gamma_sweep":
        return _cfg(
            {"f": 10_000, "alpha": 0.01,
             "policies": ["multi_lru_one", "multi_lru_all"],
             "duration": 40_000.0, "realizations": 10},
            "fig_gamma_sweep.csv",
            {"axis": "gamma", "values": [0.4, 0.6, 0.78, 1.0, 1.2]},
        )
    if name == "fig_alpha_sweep":
        return _cfg(
            {"f": 20_000, "alpha": 0.01,
             "policies": ["multi_lru_one", "multi_lru_all"],
             "duration": 40_000.0, "realizations": 10},
            "fig_alpha_sweep.csv",
            {"axis": "alpha", "values": [0.005, 0.01, 0.02, 0.05, 0.1]},
        )
    if name == "table2_mapping":
        return _cfg(
            {"f": 10_000, "alpha": 0.01, "policies": ["multi_lru_one"],
             "duration": 5_000.0, "realizations": 4},
            "table2_mapping.csv",
            {"axis": "r_b", "values": list(_TABLE2_RADII)},
        )
    if name == "twocache_appendix":
        return _cfg(
            {"placement": "two_cache", "window": [2.0, 2.0], "r_b": 1.45,
             "lam_u": 0.25, "f": 1000, "alpha": 0.05,
             "policies": ["multi_lru_one", "multi_lru_all"],
             "duration": 40_000.0, "realizations": 10},
            "twocache_appendix.csv",
        )
    if name == "temporal_properties":
        return _cfg(
            {"traffic": "snm", "lam_c_per_day": 1000.0, "r_b": 1.13,
             "k": 100, "alpha": None,
             "policies": ["multi_lru_one", "multi_lru_all", "mpc"],
             "duration": 864_000.0, "realizations": 4,
             "pop_dt_up_days": 1.0, "pop_dt_es_days": 2.0},
            "temporal_properties.csv",
        )
    raise ConfigError(f"unknown preset {name!r}")


PRESET_NAMES = (
    "fig3a_verif_one",
    "fig3b_verif_all",
    "fig4_ppp_alpha1",
    "fig4_lattice_alpha1",
    "fig4_lattice_alpha5",
    "fig_qlru",
    "fig_gamma_sweep",
    "fig_alpha_sweep",
    "table2_mapping",
    "twocache_appendix",
    "temporal_properties",
)

_PRESET_BLURBS = {
    "fig3a_verif_one": "multi-LRU-One vs radius, small catalogue",
    "fig3b_verif_all": "multi-LRU-All vs radius, small catalogue",
    "fig4_ppp_alpha1": "policy comparison vs radius, PPP stations, 1% cache",
    "fig4_lattice_alpha1": "policy comparison vs radius, lattice stations, 1% cache",
    "fig4_lattice_alpha5": "policy comparison vs radius, lattice stations, 5% cache",
    "fig_qlru": "q-multi-LRU-All across insertion probabilities",
    "fig_gamma_sweep": "policy comparison across popularity skew",
    "fig_alpha_sweep": "policy comparison across cache-to-catalogue ratios",
    "table2_mapping": "radius to mean-coverage mapping sweep",
    "twocache_appendix": "two fully overlapping caches, exact-model check",
    "temporal_properties": "time-varying traffic with windowed placement",
}


# ---------------------------------------------------------------------------
# Subcommands


def _resolve_config(args) -> dict:
    if getattr(args, "preset", None):
        cfg = preset_config(args.preset)
    elif getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        raise ConfigError("give --config FILE or --preset NAME")
    apply_overrides(cfg, getattr(args, "override", None))
    validate_config(cfg)
    return cfg


def _scenario_from(cfg: dict, args) -> Scenario:
    scenario = build_scenario(cfg["scenario"])
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["base_seed"] = args.seed
    elif "base_seed" not in cfg["scenario"]:
        updates["base_seed"] = DEFAULT_SEED
    if getattr(args, "realizations", None) is not None:
        updates["realizations"] = args.realizations
    if updates:
        try:
            scenario = dataclasses.replace(scenario, **updates)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return scenario


def _resolve_workers(args) -> int | None:
    if getattr(args, "workers", None) is not None:
        return args.workers
    env = os.environ.get("EDGECACHE_WORKERS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(
                f"EDGECACHE_WORKERS must be an integer, got {env!r}"
            ) from None
    return None


def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    scenario = _scenario_from(cfg, args)
    workers = _resolve_workers(args)
    out_path = args.out or cfg.get("output") or "hits.csv"
    if "sweep" in cfg:
        reports = sweep(scenario, cfg["sweep"]["axis"], cfg["sweep"]["values"],
                        workers=workers)
    else:
        reports = [run_experiment(scenario, workers=workers)]
    write_hit_csv(reports, out_path)
    n_rows = sum(len(r.rows) for r in reports)
    print(f"wrote {n_rows} rows to {out_path}")
    return 0


def _analytic_hit(scenario: Scenario, pol: PolicyKind) -> float:
    catalogue = make_catalogue(scenario.f, scenario.gamma)
    k = scenario.k_effective
    if scenario.placement == "two_cache":
        half = scenario.window[0] * scenario.window[1] / 2.0
        if pol.kind == "multi_lru_one":
            return two_cache_one_hit(catalogue.pmf, scenario.lam_u, half, k).total_hit
        if pol.kind in ("multi_lru_all", "q_multi_lru_all") and pol.q == 1.0:
            return two_cache_all_hit(catalogue.pmf, scenario.lam_u, half, k).total_hit
        raise ConfigError(
            f"no closed form for {pol.label!r} under two_cache placement"
        )
    profile = coverage_profile_for(scenario)
    vor_area = 1.0 / scenario.lam_b
    cov_area = math.pi * scenario.r_b ** 2
    params = AnalyticModelParams(
        catalogue=catalogue, lam_u=scenario.lam_u, k=k,
        vor_area=vor_area, cov_area=cov_area, profile=profile,
    )
    if pol.kind == "single_lru":
        conditional = single_lru_hit(catalogue, scenario.lam_u, vor_area, k)
        return float((1.0 - profile.pm[0]) * conditional.total_hit)
    if pol.kind == "multi_lru_one":
        return multi_lru_one_hit(params).total_hit
    if pol.kind in ("multi_lru_all", "q_multi_lru_all") and pol.q == 1.0:
        return multi_lru_all_hit(params).total_hit
    if pol.kind == "mpc":
        return float((1.0 - profile.pm[0]) * catalogue.pmf[:k].sum())
    raise ConfigError(f"no closed form for {pol.label!r}")


def cmd_analytic(args) -> int:
    cfg = _resolve_config(args)
    scenario = _scenario_from(cfg, args)
    if scenario.traffic != "irm":
        raise ConfigError(
            "analytic forms are defined for time-invariant (irm) traffic only"
        )
    if scenario.k_effective >= scenario.f:
        raise ConfigError(
            f"cache size {scenario.k_effective} is not below the catalogue "
            f"size {scenario.f}; every object fits, so the hit probability "
            "is 1 wherever there is coverage and there is no finite "
            "characteristic time to report"
        )
    out_path = args.out or cfg.get("output") or "analytic.csv"
    if "sweep" in cfg:
        axis, values = cfg["sweep"]["axis"], cfg["sweep"]["values"]
    else:
        axis, values = "r_b", [scenario.r_b]
    rows = []
    for v in values:
        if axis == "r_b":
            sc = dataclasses.replace(scenario, r_b=float(v))
        elif axis == "gamma":
            sc = dataclasses.replace(scenario, gamma=float(v))
        elif axis == "alpha":
            sc = dataclasses.replace(scenario, alpha=float(v), k=None)
        else:
            raise ConfigError("no closed form varies with q; sweep r_b, "
                              "gamma, or alpha instead")
        if sc.placement == "two_cache":
            n_bs = 2.0
        else:
            n_bs = coverage_profile_for(sc).n_bs
        for pol in sc.policies:
            rows.append(
                [repr(float(sc.r_b)), repr(float(n_bs)), pol.label,
                 repr(_analytic_hit(sc, pol)), repr(float(sc.gamma)),
                 repr(sc.alpha_effective)]
            )
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ANALYTIC_CSV_HEADER)
        w.writerows(rows)
    print(f"wrote {len(rows)} rows to {out_path}")
    return 0


def cmd_presets(args) -> int:
    for name in PRESET_NAMES:
        print(f"{name}: {_PRESET_BLURBS[name]}")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--preset", help="bundled configuration name")
    p.add_argument("--seed", type=int, default=None,
                   help=f"base seed (config default, else {DEFAULT_SEED})")
    p.add_argument("--realizations", type=int, default=None,
                   help="override the realization count")
    p.add_argument("--out", "-o", default=None, help="output CSV path")
    p.add_argument("--override", action="append", metavar="KEY=VALUE",
                   help="set a config entry (dotted path, JSON value); "
                        "bare keys address the scenario section")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="edgecache",
        description="edge-cache hit-probability simulator and calculator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate and write hit rows")
    _add_common(p_run)
    p_run.add_argument("--workers", type=int, default=None,
                       help="worker processes (EDGECACHE_WORKERS, else CPUs)")
    p_run.set_defaults(func=cmd_run)

    p_an = sub.add_parser("analytic", help="closed-form hit predictions")
    _add_common(p_an)
    p_an.set_defaults(func=cmd_analytic)

    p_pr = sub.add_parser("presets", help="list bundled configurations")
    p_pr.set_defaults(func=cmd_presets)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
