"""Plain-text artifacts: run configuration, tag/truth/plan tables, reports.

Config files are `key=value` lines (# comments allowed); unknown keys are
rejected so typos fail loudly. Tables are whitespace-separated columns with a
commented header carrying file-level key=value metadata.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .adaptive import CostModel, QueryPlan
from .core import DOMAIN_LI, Thresholds
from .dynamic import BACKENDS, SOURCE_SURROGATE
from .errors import ValidationError
from .metrics import DEFAULT_COVERAGE_GRID, DEFAULT_ECE_BINS


@dataclass
class RunConfig:
    """All tunable knobs with their documented defaults."""

    # distance / calibration
    backend: str = "mahalanobis"
    k: int = 100
    shrinkage: float = 1e-3
    tpr: float = 0.95
    pca_dims: int = 0
    calib_size: int = 6000
    # evaluation
    n_bins: int = DEFAULT_ECE_BINS
    coverage_grid: tuple = DEFAULT_COVERAGE_GRID
    # querying
    t_li: float = 1.0
    t_hi: float = 250.0
    budget: Optional[float] = None
    random_pool: str = "all"
    seed: int = 0
    # synthetic data
    n_samples: int = 20000
    n_classes: int = 6
    d_hi: int = 64
    d_li: int = 16
    sep_hi: float = 8.0
    sep_li: float = 8.0
    frac_uar: float = 0.2
    frac_uai: float = 0.1
    frac_ue: float = 0.1
    noise_li: float = 0.0

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValidationError(f"backend must be one of {BACKENDS}")
        if self.random_pool not in ("all", "ua"):
            raise ValidationError("random_pool must be 'all' or 'ua'")

    def cost_model(self) -> CostModel:
        return CostModel(t_li=self.t_li, t_hi=self.t_hi)


def _parse_budget(text: str):
    return None if text.lower() in ("", "none") else float(text)


def _parse_grid(text: str) -> tuple:
    values = tuple(float(v) for v in text.split(",") if v.strip())
    if not values:
        raise ValidationError("coverage_grid must list at least one value")
    return values


_PARSERS = {
    "backend": str,
    "k": int,
    "shrinkage": float,
    "tpr": float,
    "pca_dims": int,
    "calib_size": int,
    "n_bins": int,
    "coverage_grid": _parse_grid,
    "t_li": float,
    "t_hi": float,
    "budget": _parse_budget,
    "random_pool": str,
    "seed": int,
    "n_samples": int,
    "n_classes": int,
    "d_hi": int,
    "d_li": int,
    "sep_hi": float,
    "sep_li": float,
    "frac_uar": float,
    "frac_uai": float,
    "frac_ue": float,
    "noise_li": float,
}


def read_config(path) -> RunConfig:
    """Parse a key=value config file; unknown keys raise."""
    overrides = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ValidationError(f"{path}:{lineno}: expected key=value, got {text!r}")
            key, value = (part.strip() for part in text.split("=", 1))
            if key not in _PARSERS:
                raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                overrides[key] = _PARSERS[key](value)
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return RunConfig(**overrides)


def write_config(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for f in fields(cfg):
            value = getattr(cfg, f.name)
            if f.name == "coverage_grid":
                value = ",".join(f"{v:g}" for v in value)
            elif value is None:
                value = "none"
            fh.write(f"{f.name}={value}\n")


# --- tag tables ---------------------------------------------------------------


@dataclass
class TagTable:
    """Per-sample taxonomy outputs, as stored in tags.txt."""

    static_tags: np.ndarray
    dyn_tags: np.ndarray
    eu: np.ndarray
    entropy: np.ndarray
    rank: np.ndarray            # d(z; UAR bank); NaN outside the UA population
    source: str = SOURCE_SURROGATE
    domain: str = DOMAIN_LI

    def __len__(self) -> int:
        return len(self.dyn_tags)


def write_tags(table: TagTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# uqtriage tags v1\n")
        fh.write(f"# n={len(table)} source={table.source} domain={table.domain}\n")
        fh.write("# columns: index static dynamic eu entropy rank\n")
        for i in range(len(table)):
            fh.write(
                f"{i} {table.static_tags[i]} {table.dyn_tags[i]} "
                f"{table.eu[i]:.17g} {table.entropy[i]:.17g} {table.rank[i]:.17g}\n"
            )


def read_tags(path) -> TagTable:
    meta, rows = _read_table(path, "uqtriage tags v1", 6)
    return TagTable(
        static_tags=np.array([r[1] for r in rows], dtype="<U3"),
        dyn_tags=np.array([r[2] for r in rows], dtype="<U3"),
        eu=np.array([float(r[3]) for r in rows]),
        entropy=np.array([float(r[4]) for r in rows]),
        rank=np.array([float(r[5]) for r in rows]),
        source=meta.get("source", SOURCE_SURROGATE),
        domain=meta.get("domain", DOMAIN_LI),
    )


@dataclass
class FusedTable:
    """Post-fusion per-sample state, as stored alongside fused.fdmp."""

    provenance: np.ndarray      # 'LI' or 'HI'
    tags: np.ndarray            # post-fusion certainty tags
    eu: np.ndarray              # EU in the domain that supplied the prediction
    entropy: np.ndarray         # entropy of the fused probability row

    def __len__(self) -> int:
        return len(self.tags)


def write_fused_tags(table: FusedTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# uqtriage fused-tags v1\n")
        fh.write(f"# n={len(table)}\n")
        fh.write("# columns: index provenance tag eu entropy\n")
        for i in range(len(table)):
            fh.write(
                f"{i} {table.provenance[i]} {table.tags[i]} "
                f"{table.eu[i]:.17g} {table.entropy[i]:.17g}\n"
            )


def read_fused_tags(path) -> FusedTable:
    _, rows = _read_table(path, "uqtriage fused-tags v1", 5)
    return FusedTable(
        provenance=np.array([r[1] for r in rows], dtype="<U2"),
        tags=np.array([r[2] for r in rows], dtype="<U3"),
        eu=np.array([float(r[3]) for r in rows]),
        entropy=np.array([float(r[4]) for r in rows]),
    )


# --- planted truth -------------------------------------------------------------


def write_truth(tags: np.ndarray, labels: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# uqtriage truth v1\n")
        fh.write(f"# n={len(tags)}\n")
        fh.write("# columns: index tag label\n")
        for i in range(len(tags)):
            fh.write(f"{i} {tags[i]} {labels[i]}\n")


def read_truth(path) -> tuple[np.ndarray, np.ndarray]:
    _, rows = _read_table(path, "uqtriage truth v1", 3)
    tags = np.array([r[1] for r in rows], dtype="<U3")
    labels = np.array([int(r[2]) for r in rows], dtype=np.int64)
    return tags, labels


# --- query plans ---------------------------------------------------------------


def write_plan(plan: QueryPlan, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# uqtriage plan v1\n")
        budget = "none" if plan.budget is None else f"{plan.budget:.17g}"
        fh.write(
            f"# policy={plan.policy} n_total={plan.n_total} budget={budget} "
            f"realized_cost={plan.realized_cost:.17g} status={plan.status}\n"
        )
        fh.write("# columns: index score\n")
        for idx, score in zip(plan.selected, plan.ranking_scores):
            fh.write(f"{idx} {score:.17g}\n")


def read_plan(path, cost: Optional[CostModel] = None) -> QueryPlan:
    meta, rows = _read_table(path, "uqtriage plan v1", 2)
    selected = np.array([int(r[0]) for r in rows], dtype=np.int64)
    scores = np.array([float(r[1]) for r in rows])
    budget = meta.get("budget", "none")
    return QueryPlan(
        selected=selected,
        ranking_scores=scores,
        realized_cost=float(meta["realized_cost"]),
        n_total=int(meta["n_total"]),
        budget=None if budget == "none" else float(budget),
        policy=meta.get("policy", "finegrained"),
        status=meta.get("status", "ok"),
    )


# --- thresholds ------------------------------------------------------------------


def write_thresholds(li: Thresholds, hi: Thresholds, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# uqtriage thresholds v1\n")
        fh.write(f"li.tau_eu={li.tau_eu:.17g}\nli.tau_au={li.tau_au:.17g}\n")
        fh.write(f"hi.tau_eu={hi.tau_eu:.17g}\nhi.tau_au={hi.tau_au:.17g}\n")


def read_thresholds(path) -> tuple[Thresholds, Thresholds]:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            text = line.split("#", 1)[0].strip()
            if text and "=" in text:
                key, val = text.split("=", 1)
                values[key.strip()] = float(val)
    try:
        li = Thresholds(values["li.tau_eu"], values["li.tau_au"], "LI")
        hi = Thresholds(values["hi.tau_eu"], values["hi.tau_au"], "HI")
    except KeyError as exc:
        raise ValidationError(f"thresholds file missing key {exc}") from exc
    return li, hi


# --- reports ---------------------------------------------------------------------


def write_report(report: dict, path=None) -> str:
    text = json.dumps(report, indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text


# --- shared table reader -----------------------------------------------------------


def _read_table(path, expected_banner: str, n_cols: int):
    meta = {}
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# {expected_banner}":
            raise ValidationError(f"{path}: expected banner '# {expected_banner}'")
        for lineno, line in enumerate(fh, start=2):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                for token in text[1:].split():
                    if "=" in token and not token.startswith("columns"):
                        key, val = token.split("=", 1)
                        meta[key] = val
                continue
            parts = text.split()
            if len(parts) != n_cols:
                raise ValidationError(f"{path}:{lineno}: expected {n_cols} columns, got {len(parts)}")
            rows.append(parts)
    return meta, rows
