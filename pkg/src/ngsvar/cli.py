"""Command-line driver.

Every command reads an optional YAML config; flags override config values.
Outputs carry the SHA-256 of the effective config (a ``# config-sha256``
comment in CSV files, a ``config_hash`` key in JSON files).

Exit codes: 0 success, 2 input error, 3 missing posterior or other upstream
artifact, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import logging
import sys
import warnings
from pathlib import Path

import numpy as np
import yaml

from . import io
from .errors import (
    DecompositionError,
    DegenerateDensityError,
    EstimatorError,
    FitError,
    NgsvarError,
    SamplerError,
)
from .kernels import rng_stream
from .model import Design, ModelSpec, SamplerSettings, read_csv, standardize
from .priors import PriorConfig
from .restrictions import ProxySpec, RestrictionSet, augment_with_proxy

log = logging.getLogger("ngsvar")

EXIT_OK, EXIT_INPUT, EXIT_MISSING, EXIT_NUMERIC = 0, 2, 3, 4

DEFAULTS = {
    "data": None,
    "proxy_column": None,
    "output": "ngsvar-out",
    "seed": 0,
    "model": {"p": 1, "r": 1, "unit_variance_factors": False, "allow_large_r": False},
    "prior": {},
    "sampler": {},
    "restrictions": [],
    "proxy": {"target": 1, "exogeneity": True, "in_model": False},
    "normalize": {"mode": "auto", "sign_variable": None},
    "dic": {"R": 500, "M": 2000, "stride": 1, "estimate": "mean", "method": "factorized"},
    "irf": {"horizon": 48, "normalize": None, "shock": None},
    "label": {"target": None, "narrative": []},
    "montecarlo": {"replications": 200, "T": 1000, "distribution": "t", "p": 0},
    "rotation": {"distribution": "t", "angle": float(np.pi / 5), "T": 1_000_000},
}


class InputError(NgsvarError):
    pass


class MissingArtifact(NgsvarError):
    pass


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in (extra or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path=None, overrides: dict = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise InputError(f"config file {p} not found")
        try:
            loaded = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise InputError(f"cannot parse {p}: {exc}") from None
        if not isinstance(loaded, dict):
            raise InputError(f"{p} must hold a mapping")
        cfg = _merge(cfg, loaded)
    return _merge(cfg, overrides or {})


def _sampler(cfg) -> SamplerSettings:
    s = dict(cfg["sampler"])
    if "order" in s:
        s["order"] = tuple(s["order"])
    if "df_bounds" in s:
        s["df_bounds"] = tuple(s["df_bounds"])
    s.setdefault("seed", int(cfg["seed"]))
    try:
        return SamplerSettings(**s)
    except TypeError as exc:
        raise InputError(f"bad sampler setting: {exc}") from None


def _spec(cfg, n: int, T: int, r: int = None) -> ModelSpec:
    m = cfg["model"]
    try:
        prior = PriorConfig(**cfg["prior"])
    except TypeError as exc:
        raise InputError(f"bad prior setting: {exc}") from None
    return ModelSpec(n=n, p=int(m["p"]), r=int(m["r"] if r is None else r), T=T, prior=prior,
                     sampler=_sampler(cfg), unit_variance_factors=bool(m.get("unit_variance_factors")),
                     allow_large_r=bool(m.get("allow_large_r")))


def _load_data(cfg):
    if not cfg.get("data"):
        raise InputError("no data file given (config key 'data' or --data)")
    path = Path(cfg["data"])
    if not path.exists():
        raise InputError(f"data file {path} not found")
    return read_csv(path, cfg.get("proxy_column"))


def _prepare(cfg, r: int = None, proxy_in_model: bool = None):
    """Standardised design, restrictions and spec for one estimation."""
    data, proxy = _load_data(cfg)
    p = int(cfg["model"]["p"])
    std, scale = standardize(data, trim=p)
    design = Design.from_dataset(std, p, scale=scale)
    spec = _spec(cfg, data.n, design.T, r)
    restrictions = RestrictionSet.from_config(cfg["restrictions"], data.names)
    in_model = cfg["proxy"].get("in_model") if proxy_in_model is None else proxy_in_model
    proxy_series = None if proxy is None else proxy[p:]
    if in_model:
        if proxy_series is None:
            raise InputError("proxy equation requested but no proxy column configured")
        ps = ProxySpec(proxy_series, target=int(cfg["proxy"]["target"]) - 1,
                       exogeneity=bool(cfg["proxy"]["exogeneity"]), name=str(cfg["proxy_column"]))
        design, restrictions = augment_with_proxy(design, ps, restrictions, spec.r)
    return design, restrictions, spec, proxy_series


def _estimate(cfg, r: int = None, proxy_in_model: bool = None, jobs: int = 1):
    from .gibbs import run_chain

    design, restrictions, spec, proxy = _prepare(cfg, r, proxy_in_model)
    norm = cfg["normalize"]
    mode = norm.get("mode", "auto")
    sign_row = None
    if norm.get("sign_variable"):
        sign_row = list(design.names).index(norm["sign_variable"])
    use_proxy = proxy if mode in ("auto", "proxy") and proxy is not None and restrictions.empty else None
    if mode == "proxy" and use_proxy is None:
        raise InputError("proxy normalisation needs a proxy column")
    rng = rng_stream(int(cfg["seed"]), 0 if r is None else int(r))
    return run_chain(spec, design, rng, restrictions=restrictions, normalize=mode, proxy=use_proxy,
                     sign_row=sign_row), proxy


# -- commands -------------------------------------------------------------------------

def cmd_estimate(cfg, args) -> int:
    out = Path(cfg["output"])
    h = io.config_hash(cfg)
    sample, _ = _estimate(cfg)
    io.save_posterior(sample, out / "posterior", h)
    io.write_json(out / "summary.json", io.posterior_summary(sample), h)
    print(f"wrote {len(sample)} draws to {out / 'posterior'}")
    return EXIT_OK


def cmd_dic(cfg, args) -> int:
    from .dic import compute_dic

    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    h = io.config_hash(cfg)
    d = cfg["dic"]
    rows = []

    def one(r, proxy_in_model=None, exogeneity=None):
        c = cfg if exogeneity is None else _merge(cfg, {"proxy": {"exogeneity": exogeneity}})
        sample, _ = _estimate(c, r, proxy_in_model)
        res = compute_dic(sample, R=int(d["R"]), rng=rng_stream(int(cfg["seed"]), 1000 + int(r)),
                          M=int(d["M"]), stride=int(d["stride"]), estimate=d["estimate"],
                          method=d["method"], jobs=args.jobs)
        return res

    if args.compare_proxy:
        r = int(cfg["model"]["r"])
        restricted = one(r, True, True)
        free = one(r, True, False)
        io.write_csv(out / "dic_proxy.csv", ["quantity", "proxy_restrictions", "no_restrictions"],
                     [["DIC", restricted.dic, free.dic], ["p_D", restricted.p_d, free.p_d],
                      ["D_bar", restricted.d_bar, free.d_bar]], h)
        print(f"DIC with proxy restrictions {restricted.dic:.1f}, without {free.dic:.1f}")
        return EXIT_OK
    r_list = [int(x) for x in (args.r_list or [cfg["model"]["r"]])]
    if not r_list:
        raise InputError("empty r list")
    for r in r_list:
        res = one(r)
        rows.append([r, res.dic, res.p_d, res.d_bar, res.d_hat,
                     float(np.median(res.ess)) if res.ess.size else float("nan")])
    best = int(np.argmin([row[1] for row in rows]))
    io.write_csv(out / "dic.csv", ["r", "DIC", "p_D", "D_bar", "D_hat", "median_ess", "selected"],
                 [row + [int(i == best)] for i, row in enumerate(rows)], h)
    print(f"minimum DIC at r={rows[best][0]}")
    return EXIT_OK


def _posterior(args):
    path = Path(args.posterior)
    if not (path / "meta.json").exists():
        raise MissingArtifact(f"no posterior sample at {path}; run 'estimate' first")
    return io.load_posterior(path)


def _parse_normalization(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return text[0], float(text[1])
    var, _, val = str(text).partition("=")
    if not val:
        raise InputError(f"normalisation must look like VARIABLE=VALUE, got {text!r}")
    return var.strip(), float(val)


def cmd_irf(cfg, args) -> int:
    from .structural import compute_irfs

    sample = _posterior(args)
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    h = io.config_hash(cfg)
    icfg = cfg["irf"]
    shock = icfg.get("shock")
    res = compute_irfs(sample, int(icfg["horizon"]), _parse_normalization(icfg.get("normalize")),
                       shock=None if shock is None else int(shock) - 1)
    S, n, r, H1 = res.responses.shape
    rows = ([s, j + 1, res.names[i] if res.names else i, hz, res.responses[s, i, j, hz]]
            for s in range(S) for j in range(r) for i in range(n) for hz in range(H1))
    io.write_csv(out / "irf_draws.csv", ["draw", "factor", "variable", "horizon", "value"], rows, h)
    qrows = ([lev, j + 1, res.names[i] if res.names else i, hz, res.quantiles[q, i, j, hz]]
             for q, lev in enumerate(res.levels) for j in range(r) for i in range(n) for hz in range(H1))
    io.write_csv(out / "irf_quantiles.csv", ["level", "factor", "variable", "horizon", "value"], qrows, h)
    print(f"wrote impulse responses for {S} draws to {out}")
    return EXIT_OK


def cmd_label(cfg, args) -> int:
    from .structural import label_shocks, nongaussianity_posteriors

    sample = _posterior(args)
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    h = io.config_hash(cfg)
    if sample.design is None:
        raise MissingArtifact("posterior lacks the estimation data")
    if args.proxy_file is not None or cfg.get("data"):
        data, proxy = _load_data(cfg) if args.proxy_file is None else read_csv(args.proxy_file, cfg["proxy_column"])
        if proxy is None:
            raise InputError("no proxy column configured")
        proxy = proxy[sample.design.p:]
    else:
        raise InputError("labelling needs the data file with the proxy column")
    lcfg = cfg["label"]
    names = list(sample.design.names)
    target = lcfg.get("target")
    target = 0 if target is None else (names.index(target) if isinstance(target, str) else int(target))
    dates = [(int(d["t"]), int(d.get("sign", 1))) for d in lcfg.get("narrative") or []]
    rep = label_shocks(sample, proxy, target, dates)
    summary = rep.summary()
    ng = nongaussianity_posteriors(sample)
    summary["skewness_quantiles"] = ng["skewness_quantiles"]
    summary["kurtosis_quantiles"] = ng["kurtosis_quantiles"]
    io.write_json(out / "label.json", summary, h)
    print(f"selected factor {rep.selected + 1} (median |corr| {rep.median_abs_corr[rep.selected]:.3f})")
    return EXIT_OK


def cmd_montecarlo(cfg, args) -> int:
    from .simulation import MonteCarloConfig, run_monte_carlo

    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    h = io.config_hash(cfg)
    m = cfg["montecarlo"]
    sampler_kw = dict(burn_in=1000, draws=2000, store_latent=False, store_hyper=False, rescale_factors=True)
    sampler_kw.update(cfg["sampler"])
    mc = MonteCarloConfig(replications=int(m["replications"]), T=int(m["T"]), distribution=m["distribution"],
                          p=int(m["p"]), seed=int(cfg["seed"]), jobs=args.jobs,
                          sampler=SamplerSettings(**sampler_kw))
    rep = run_monte_carlo(mc)
    io.write_csv(out / "montecarlo.csv", ["parameter", "truth", "bias", "mse", "length", "coverage"],
                 [[r["parameter"], r["truth"], r["bias"], r["mse"], r["length"], r["coverage"]]
                  for r in rep.rows()], h)
    print(f"{rep.replications} replications ({rep.failures} failed)")
    return EXIT_OK


def cmd_rotation_demo(cfg, args) -> int:
    from .identification import rotation_demo

    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    h = io.config_hash(cfg)
    rc = cfg["rotation"]
    rows = []
    for dist in ("gaussian", rc["distribution"]):
        res = rotation_demo(dist, float(rc["angle"]), int(rc["T"]), rng_stream(int(cfg["seed"]), 0))
        rows.append([dist, res["corr_before"], res["corr_sq_before"], res["corr_after"], res["corr_sq_after"]])
    io.write_csv(out / "rotation.csv", ["distribution", "corr", "corr_sq", "corr_rotated", "corr_sq_rotated"],
                 rows, h)
    for row in rows:
        print(", ".join(str(x) for x in row))
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate,
    "dic": cmd_dic,
    "irf": cmd_irf,
    "label": cmd_label,
    "montecarlo": cmd_montecarlo,
    "rotation-demo": cmd_rotation_demo,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ngsvar", description="Non-Gaussian structural factor VAR")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="YAML configuration file")
    ap.add_argument("--data", help="CSV with variable names in the first row")
    ap.add_argument("--proxy-column")
    ap.add_argument("--output", "-o")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--p", type=int, help="lag order")
    ap.add_argument("--r", type=int, help="number of factors")
    ap.add_argument("--burn-in", type=int)
    ap.add_argument("--draws", type=int)
    ap.add_argument("--unit-variance", action="store_true", default=None)
    ap.add_argument("--allow-large-r", action="store_true", default=None)
    ap.add_argument("--jobs", type=int, default=1, help="parallel workers")
    ap.add_argument("--r-list", type=lambda s: [int(x) for x in s.split(",") if x.strip()],
                    help="comma-separated factor counts for 'dic'")
    ap.add_argument("--compare-proxy", action="store_true",
                    help="'dic': compare the proxy model with and without exclusion restrictions")
    ap.add_argument("--posterior", help="posterior directory for 'irf' and 'label'")
    ap.add_argument("--proxy-file", help="'label': CSV holding the proxy column")
    ap.add_argument("--horizon", type=int)
    ap.add_argument("--normalize", help="'irf': VARIABLE=VALUE impact normalisation")
    ap.add_argument("--shock", type=int, help="'irf': 1-based factor to normalise")
    ap.add_argument("--replications", type=int)
    ap.add_argument("--T", type=int, dest="T")
    ap.add_argument("--distribution")
    ap.add_argument("--verbose", "-v", action="store_true")
    return ap


def _overrides(args) -> dict:
    o = {}
    for key in ("data", "proxy_column", "output", "seed"):
        val = getattr(args, key)
        if val is not None:
            o[key] = val
    model = {k: v for k, v in (("p", args.p), ("r", args.r), ("unit_variance_factors", args.unit_variance),
                                ("allow_large_r", args.allow_large_r)) if v is not None}
    if model:
        o["model"] = model
    sampler = {k: v for k, v in (("burn_in", args.burn_in), ("draws", args.draws)) if v is not None}
    if sampler:
        o["sampler"] = sampler
    irf = {k: v for k, v in (("horizon", args.horizon), ("normalize", args.normalize), ("shock", args.shock))
           if v is not None}
    if irf:
        o["irf"] = irf
    mc = {k: v for k, v in (("replications", args.replications), ("T", args.T),
                             ("distribution", args.distribution)) if v is not None}
    if mc:
        o["montecarlo"] = mc
        if args.distribution is not None:
            o["rotation"] = {"distribution": args.distribution}
        if args.T is not None:
            o.setdefault("rotation", {})["T"] = args.T
    return o


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", UserWarning)
    try:
        cfg = load_config(args.config, _overrides(args))
        return COMMANDS[args.command](cfg, args)
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (SamplerError, DecompositionError, FitError, EstimatorError, DegenerateDensityError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (NgsvarError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
