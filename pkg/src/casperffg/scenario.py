"""Scenario configuration and the scenario-file format.

Scenario files are TOML. Top-level keys::

    name = "offline67"            # optional label copied into trace headers
    seed = 1                      # 64-bit integer
    max_epochs = 5000
    proposal_model = "deterministic"   # or "stochastic"
    stop = "first_finalization"   # or "max_epochs"
    total_deposit = 1e7           # scale for validators given by share

    [params]                      # any ProtocolParams field
    epoch_length = 50

    [[validators]]
    id = "silent"
    share = 0.67                  # or deposit = 6.7e6
    count = 1                     # split evenly into ids silent-0, silent-1, ...
    strategy = "offline"          # honest | offline | worst_case | equivocator
    from_epoch = 2
    side = "A"                    # branch during a partition
    sides = ["A", "B"]            # equivocators only

    [partition]
    start_epoch = 2
    end_epoch = 4000              # optional, the run halts there
    shared_view = false
    [[partition.sides]]
    name = "A"
    mu = 0.51
"""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, DomainError
from .params import DEFAULT_PARAMS, ProtocolParams
from .strategies import Kind, Strategy

PROPOSAL_MODELS = ("deterministic", "stochastic")
STOP_CONDITIONS = ("max_epochs", "first_finalization")
MAIN = "main"


@dataclass(frozen=True)
class ValidatorSpec:
    id: str
    deposit: float
    strategy: Strategy = Strategy()
    side: Optional[str] = None


@dataclass(frozen=True)
class SideSpec:
    name: str
    mu: float


@dataclass(frozen=True)
class PartitionSpec:
    start_epoch: int
    sides: tuple[SideSpec, ...]
    end_epoch: Optional[int] = None
    shared_view: bool = False


@dataclass
class ScenarioConfig:
    validators: list[ValidatorSpec]
    params: ProtocolParams = DEFAULT_PARAMS
    proposal_model: str = "deterministic"
    partition: Optional[PartitionSpec] = None
    seed: int = 0
    max_epochs: int = 100
    stop: str = "max_epochs"
    name: str = ""

    def problems(self) -> list[str]:
        out = []
        if not self.validators:
            out.append("validators: at least one validator is required")
        seen = set()
        for v in self.validators:
            if v.id in seen:
                out.append(f"validators: duplicate id {v.id!r}")
            seen.add(v.id)
            if not (v.deposit > 0 and math.isfinite(v.deposit)):
                out.append(f"validators.{v.id}.deposit: must be a positive finite number, got {v.deposit}")
        if self.proposal_model not in PROPOSAL_MODELS:
            out.append(f"proposal_model: expected one of {PROPOSAL_MODELS}, got {self.proposal_model!r}")
        if self.stop not in STOP_CONDITIONS:
            out.append(f"stop: expected one of {STOP_CONDITIONS}, got {self.stop!r}")
        if not isinstance(self.max_epochs, int) or self.max_epochs < 1:
            out.append(f"max_epochs: must be an integer >= 1, got {self.max_epochs!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            out.append(f"seed: must be an integer in [0, 2**64), got {self.seed!r}")
        part = self.partition
        names = {MAIN}
        if part is not None:
            names = {s.name for s in part.sides}
            if len(names) != len(part.sides) or not part.sides:
                out.append("partition.sides: need at least one side with unique names")
            if MAIN in names:
                out.append(f"partition.sides: the name {MAIN!r} is reserved")
            for s in part.sides:
                if not 0 < s.mu <= 1:
                    out.append(f"partition.sides.{s.name}.mu: must lie in (0, 1], got {s.mu}")
            if abs(sum(s.mu for s in part.sides) - 1) > 1e-9:
                out.append("partition.sides: mining shares must sum to 1")
            if part.start_epoch < 0:
                out.append("partition.start_epoch: must be >= 0")
            if part.end_epoch is not None and part.end_epoch <= part.start_epoch:
                out.append("partition.end_epoch: must exceed start_epoch")
        for v in self.validators:
            if v.strategy.kind is Kind.EQUIVOCATOR:
                bad = [s for s in v.strategy.sides if s not in names]
                if bad:
                    out.append(f"validators.{v.id}.sides: unknown sides {bad}")
            elif part is not None and v.side not in names:
                out.append(f"validators.{v.id}.side: must name a partition side, got {v.side!r}")
            elif part is None and v.side not in (None, MAIN):
                out.append(f"validators.{v.id}.side: no partition configured")
        return out

    def validate(self) -> "ScenarioConfig":
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    def header(self) -> dict:
        """Flat description recorded at the top of every trace."""
        h = {"scenario": self.name or "-", "seed": self.seed, "proposal_model": self.proposal_model,
             "max_epochs": self.max_epochs, "stop": self.stop}
        for f in dataclasses.fields(self.params):
            h[f"params.{f.name}"] = getattr(self.params, f.name)
        if self.partition is not None:
            p = self.partition
            h["partition"] = (f"start={p.start_epoch} end={p.end_epoch} shared_view={p.shared_view} "
                              + " ".join(f"{s.name}:{s.mu!r}" for s in p.sides))
        h["validators"] = len(self.validators)
        return h


_TOP_KEYS = {"name", "seed", "max_epochs", "proposal_model", "stop", "total_deposit",
             "params", "validators", "partition"}
_VALIDATOR_KEYS = {"id", "deposit", "share", "count", "strategy", "from_epoch", "side", "sides"}
_PARTITION_KEYS = {"start_epoch", "end_epoch", "shared_view", "sides"}


def _strategy(entry: dict, where: str, problems: list[str]) -> Strategy:
    name = entry.get("strategy", "honest")
    try:
        kind = Kind(name)
    except ValueError:
        problems.append(f"{where}.strategy: expected one of {[k.value for k in Kind]}, got {name!r}")
        return Strategy()
    from_epoch = entry.get("from_epoch", 0)
    if not isinstance(from_epoch, int) or from_epoch < 0:
        problems.append(f"{where}.from_epoch: must be an integer >= 0")
        from_epoch = 0
    if kind is Kind.EQUIVOCATOR:
        return Strategy(kind, 0, tuple(entry.get("sides", ())))
    return Strategy(kind, from_epoch)


def config_from_dict(data: dict) -> ScenarioConfig:
    problems = [f"{k}: unknown key" for k in sorted(set(data) - _TOP_KEYS)]

    params = DEFAULT_PARAMS
    raw_params = data.get("params", {})
    known = {f.name for f in dataclasses.fields(ProtocolParams)}
    problems += [f"params.{k}: unknown key" for k in sorted(set(raw_params) - known)]
    try:
        params = ProtocolParams(**{k: v for k, v in raw_params.items() if k in known})
    except (DomainError, TypeError) as e:
        problems.append(f"params: {e}")

    scale = data.get("total_deposit", 1.0)
    validators = []
    for n, entry in enumerate(data.get("validators", [])):
        where = f"validators[{n}]"
        problems += [f"{where}.{k}: unknown key" for k in sorted(set(entry) - _VALIDATOR_KEYS)]
        if "id" not in entry:
            problems.append(f"{where}.id: missing")
            continue
        if ("deposit" in entry) == ("share" in entry):
            problems.append(f"{where}: give exactly one of deposit or share")
            continue
        amount = entry["deposit"] if "deposit" in entry else entry["share"] * scale
        count = entry.get("count", 1)
        if not isinstance(count, int) or count < 1:
            problems.append(f"{where}.count: must be an integer >= 1")
            continue
        strategy = _strategy(entry, where, problems)
        ids = [str(entry["id"])] if count == 1 else [f"{entry['id']}-{j}" for j in range(count)]
        for vid in ids:
            validators.append(ValidatorSpec(vid, float(amount) / count, strategy, entry.get("side")))

    partition = None
    raw_part = data.get("partition")
    if raw_part is not None:
        problems += [f"partition.{k}: unknown key" for k in sorted(set(raw_part) - _PARTITION_KEYS)]
        sides = []
        for s in raw_part.get("sides", []):
            if "name" not in s or "mu" not in s:
                problems.append("partition.sides: each side needs name and mu")
                continue
            sides.append(SideSpec(str(s["name"]), float(s["mu"])))
        partition = PartitionSpec(raw_part.get("start_epoch", 0), tuple(sides),
                                  raw_part.get("end_epoch"), bool(raw_part.get("shared_view", False)))

    cfg = ScenarioConfig(
        validators=validators, params=params,
        proposal_model=data.get("proposal_model", "deterministic"),
        partition=partition, seed=data.get("seed", 0),
        max_epochs=data.get("max_epochs", 100), stop=data.get("stop", "max_epochs"),
        name=str(data.get("name", "")),
    )
    problems += cfg.problems()
    if problems:
        raise ConfigError(problems)
    return cfg


def load_scenario(path) -> ScenarioConfig:
    """Read a scenario file; paths resolve against the working directory."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as e:
        raise ConfigError([f"{path}: {e.strerror or e}"]) from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError([f"{path}: {e}"]) from None
    if not data.get("name"):
        data["name"] = path.stem
    return config_from_dict(data)


def offline_scenario(offline: float, D0: float = 1e7, fault_epoch: int = 2,
                     params: ProtocolParams = DEFAULT_PARAMS, max_epochs: int = 10**5) -> ScenarioConfig:
    """One voter holding ``1 - offline`` and one validator that goes silent at ``fault_epoch``."""
    return ScenarioConfig(
        validators=[
            ValidatorSpec("voter", (1 - offline) * D0),
            ValidatorSpec("silent", offline * D0, Strategy.offline(fault_epoch)),
        ],
        params=params, max_epochs=max_epochs, stop="first_finalization",
        name=f"offline-{offline!r}",
    )


def partition_scenario(alpha: float, mu: float, seed: int, params: ProtocolParams = DEFAULT_PARAMS,
                       start_epoch: int = 2, max_epochs: int = 10**4,
                       proposal_model: str = "stochastic", D0: float = 1e7) -> ScenarioConfig:
    """Two-sided partition: side A holds ``alpha`` of stake and ``mu`` of mining power."""
    return ScenarioConfig(
        validators=[ValidatorSpec("a", alpha * D0, side="A"),
                    ValidatorSpec("b", (1 - alpha) * D0, side="B")],
        params=params, proposal_model=proposal_model,
        partition=PartitionSpec(start_epoch, (SideSpec("A", mu), SideSpec("B", 1 - mu))),
        seed=seed, max_epochs=max_epochs, stop="first_finalization",
        name=f"partition-{alpha!r}-{mu!r}",
    )
