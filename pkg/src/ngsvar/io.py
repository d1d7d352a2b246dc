"""On-disk layout of a posterior sample.

A run directory holds one ``.npy`` file per parameter block (draw axis
first), ``design.npz`` with the estimation data, and ``meta.json`` with the
model settings, the signed permutations applied by normalisation and the
hash of the producing configuration.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import warnings
from pathlib import Path

import numpy as np

from .errors import DomainError
from .identification import SignedPermutation
from .model import Design, ModelSpec, SamplerSettings, ScaleInfo
from .priors import PriorConfig

BLOCKS = ("beta", "L", "sigma2", "v", "f", "W", "lam", "psi")


def config_hash(config) -> str:
    """SHA-256 of the canonical JSON form of ``config``."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(text.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path, payload, header_hash: str = None) -> None:
    if header_hash is not None:
        payload = {"config_hash": header_hash, **payload}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def write_csv(path, header, rows, header_hash: str = None) -> None:
    """CSV with an optional ``# config-sha256: ...`` comment line first."""
    with Path(path).open("w", newline="") as fh:
        if header_hash is not None:
            fh.write(f"# config-sha256: {header_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def save_posterior(sample, directory, header_hash: str = None) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for name in BLOCKS:
        arr = getattr(sample, name)
        if arr is not None:
            np.save(out / f"{name}.npy", arr)
    if sample.design is not None:
        d = sample.design
        extra = {}
        if d.scale is not None:
            extra = {"scale_mean": d.scale.mean, "scale_sd": d.scale.sd}
        np.savez(out / "design.npz", Y=d.Y, X=d.X, x_mask=d.x_mask, **extra)
    meta = {
        "meta": {k: v for k, v in sample.meta.items() if k != "seconds"},
        "permutations": [[list(p.perm), list(p.signs), bool(p.tie)] for p in sample.permutations],
        "design": None if sample.design is None else {
            "p": sample.design.p, "names": list(sample.design.names), "n_var": sample.design.n_var},
        "spec": None if sample.spec is None else _spec_dict(sample.spec),
    }
    write_json(out / "meta.json", meta, header_hash)
    return out


def _spec_dict(spec: ModelSpec) -> dict:
    d = dataclasses.asdict(spec)
    d["sampler"]["order"] = list(d["sampler"]["order"])
    d["sampler"]["df_bounds"] = list(d["sampler"]["df_bounds"])
    return d


def _spec_from_dict(d: dict) -> ModelSpec:
    d = dict(d)
    sampler = dict(d.pop("sampler"))
    sampler["order"] = tuple(sampler["order"])
    sampler["df_bounds"] = tuple(sampler["df_bounds"])
    prior = PriorConfig(**d.pop("prior"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ModelSpec(prior=prior, sampler=SamplerSettings(**sampler), **d)


def load_posterior(directory):
    """Inverse of :func:`save_posterior`."""
    from .gibbs import PosteriorSample

    src = Path(directory)
    meta_path = src / "meta.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"no posterior sample in {src}")
    meta = json.loads(meta_path.read_text())
    arrays = {name: (np.load(src / f"{name}.npy") if (src / f"{name}.npy").exists() else None)
              for name in BLOCKS}
    for name in ("beta", "L", "sigma2", "v"):
        if arrays[name] is None:
            raise DomainError(f"{src} lacks the {name} block")
    design = None
    if meta.get("design") is not None and (src / "design.npz").exists():
        z = np.load(src / "design.npz")
        scale = ScaleInfo(z["scale_mean"], z["scale_sd"]) if "scale_sd" in z.files else None
        info = meta["design"]
        design = Design(z["Y"], z["X"], info["p"], tuple(info["names"]), info["n_var"],
                        x_mask=z["x_mask"], scale=scale)
    spec = _spec_from_dict(meta["spec"]) if meta.get("spec") else None
    perms = [SignedPermutation(tuple(p), tuple(s), tie) for p, s, tie in meta.get("permutations", [])]
    sample = PosteriorSample(meta=dict(meta.get("meta", {})), permutations=perms, design=design,
                             spec=spec, **arrays)
    sample.meta["config_hash"] = meta.get("config_hash")
    return sample


def posterior_summary(sample, levels=(0.16, 0.5, 0.84)) -> dict:
    """Posterior means and quantiles of the parameter blocks, plus ESS."""
    out = {"draws": len(sample), "levels": list(levels)}
    for name in ("beta", "L", "sigma2", "v"):
        arr = getattr(sample, name)
        out[name] = {"mean": arr.mean(axis=0), "quantiles": np.quantile(arr, levels, axis=0)}
    diag = sample.diagnostics()
    out["diagnostics"] = {k: v for k, v in diag.items()}
    out["normalization"] = {k: sample.meta.get(k) for k in
                            ("normalization", "normalization_ties", "normalization_changed")}
    return out


__all__ = ["config_hash", "save_posterior", "load_posterior", "posterior_summary", "write_json", "write_csv"]
