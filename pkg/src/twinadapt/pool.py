"""Model pool: metadata registry, suitability matching, candidate enumeration.

Every behavior model is classified along four dimensions (depth, behavior
type, operating range, subcomponent width) plus the phenomena it can
reproduce. The pool answers purely metadata-level questions; whether a
model can actually be executed is the concern of twinadapt.models.
"""

from __future__ import annotations

import itertools
import json
import threading
from dataclasses import dataclass, field, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import (
    DuplicateIdError,
    InvalidDescriptorError,
    NoSuitableCandidateError,
    UnknownModelIdError,
)

DEPTHS = (1, 2, 3, 4, 5)
BEHAVIOR_TYPES = ("discrete-event", "discrete-time", "continuous")

# Depths 1-3 are executable and pin their behaviour type; 4/5 are
# metadata-only here and stay unconstrained.
DEPTH_BEHAVIOR = {1: "discrete-event", 2: "discrete-time", 3: "continuous"}

STATUS_ACTIVE = "active"
STATUS_CANDIDATE = "candidate"
STATUS_RETIRED = "retired"

DIRECTIVE_INCREASE = "increase"
DIRECTIVE_DECREASE = "decrease"
DIRECTIVE_ANY = "any"


@dataclass(frozen=True)
class Tunable:
    name: str
    unit: str
    lower: float
    upper: float
    nominal: float


@dataclass(frozen=True)
class Port:
    name: str
    direction: str  # "in" | "out"
    signal: str


@dataclass(frozen=True)
class ModelDescriptor:
    """Pool metadata for one behavior model."""

    id: str
    slot: str
    depth: int
    behavior_type: str
    range: frozenset[str]
    width: frozenset[str]
    provided_phenomena: frozenset[str]
    ports: tuple[Port, ...]
    tunables: tuple[Tunable, ...]
    cost_rating: float
    compute_rating: float
    endpoint: str | None = None

    def tunable(self, name: str) -> Tunable | None:
        for tun in self.tunables:
            if tun.name == name:
                return tun
        return None

    def port(self, name: str) -> Port | None:
        for port in self.ports:
            if port.name == name:
                return port
        return None

    def ports_by_direction(self, direction: str) -> list[Port]:
        return [p for p in self.ports if p.direction == direction]

    def output_signals(self) -> set[str]:
        return {p.signal for p in self.ports if p.direction == "out"}

    def nominal_params(self) -> dict[str, float]:
        return {t.name: t.nominal for t in self.tunables}

    def violations(self) -> list[str]:
        problems = []
        if not self.id:
            problems.append("id must be nonempty")
        if self.depth not in DEPTHS:
            problems.append(f"depth {self.depth} not in 1..5")
        if self.behavior_type not in BEHAVIOR_TYPES:
            problems.append(f"unknown behavior_type {self.behavior_type!r}")
        expected = DEPTH_BEHAVIOR.get(self.depth)
        if expected is not None and self.behavior_type != expected:
            problems.append(
                f"depth {self.depth} requires behavior_type {expected!r}, "
                f"got {self.behavior_type!r}"
            )
        for tun in self.tunables:
            if not (tun.lower <= tun.nominal <= tun.upper):
                problems.append(
                    f"tunable {tun.name!r} nominal {tun.nominal} outside "
                    f"[{tun.lower}, {tun.upper}]"
                )
        names = [p.name for p in self.ports]
        if len(names) != len(set(names)):
            problems.append("port names not unique")
        for port in self.ports:
            if port.direction not in ("in", "out"):
                problems.append(f"port {port.name!r} direction must be in|out")
        if self.cost_rating < 0:
            problems.append("cost_rating must be >= 0")
        if self.compute_rating < 0:
            problems.append("compute_rating must be >= 0")
        return problems


@dataclass(frozen=True)
class RequirementSpec:
    """What an application needs from the active configuration."""

    app_id: str
    required_phenomena: dict[str, int | None]  # tag -> optional minimum depth
    monitored_signals: frozenset[str]
    window_length: float

    def violations(self) -> list[str]:
        problems = []
        if not self.required_phenomena:
            problems.append("required_phenomena must be nonempty")
        if not self.window_length > 0:
            problems.append("window_length must be > 0")
        return problems


@dataclass(frozen=True)
class Binding:
    model_id: str
    params: dict[str, float] = field(default_factory=dict)

    def __hash__(self):  # params dict keeps Binding unhashable by default
        return hash((self.model_id, tuple(sorted(self.params.items()))))


@dataclass(frozen=True)
class Coupling:
    src_slot: str
    src_port: str
    dst_slot: str
    dst_port: str


@dataclass
class ModelConfiguration:
    """A coupled set of model instances with parameter values."""

    id: str
    bindings: dict[str, Binding]  # slot -> binding
    couplings: list[Coupling] = field(default_factory=list)
    status: str = STATUS_CANDIDATE

    def model_ids(self) -> dict[str, str]:
        return {slot: b.model_id for slot, b in self.bindings.items()}

    def with_params(self, params_by_slot: dict[str, dict[str, float]]) -> "ModelConfiguration":
        bindings = {
            slot: Binding(b.model_id, dict(params_by_slot.get(slot, b.params)))
            for slot, b in self.bindings.items()
        }
        return ModelConfiguration(
            id=self.id, bindings=bindings, couplings=list(self.couplings), status=self.status
        )

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "bindings": {
                slot: {"model": b.model_id, "params": dict(sorted(b.params.items()))}
                for slot, b in sorted(self.bindings.items())
            },
            "couplings": [
                [c.src_slot, c.src_port, c.dst_slot, c.dst_port] for c in self.couplings
            ],
            "status": self.status,
        }


class ModelPool:
    """Registry of model descriptors.

    Registrations are serialized behind a lock; descriptors are immutable
    once registered, so reads need no synchronization.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._models: dict[str, ModelDescriptor] = {}

    def __len__(self) -> int:
        return len(self._models)

    def register_model(self, descriptor: ModelDescriptor) -> str:
        problems = descriptor.violations()
        if problems:
            raise InvalidDescriptorError(
                f"descriptor {descriptor.id!r}: " + "; ".join(problems)
            )
        with self._lock:
            if descriptor.id in self._models:
                raise DuplicateIdError(f"model id {descriptor.id!r} already registered")
            self._models[descriptor.id] = descriptor
        return descriptor.id

    def get(self, model_id: str) -> ModelDescriptor:
        try:
            return self._models[model_id]
        except KeyError:
            raise UnknownModelIdError(f"unknown model id {model_id!r}") from None

    def all_models(self) -> list[ModelDescriptor]:
        return sorted(self._models.values(), key=lambda d: d.id)

    def slots(self) -> set[str]:
        return {d.slot for d in self._models.values()}

    # -- functional suitability ------------------------------------------

    def query_suitable(
        self, slot: str, phenomena: dict[str, int | None] | None = None
    ) -> list[ModelDescriptor]:
        """Descriptors for a slot covering all requested phenomena.

        A phenomenon with a minimum depth is only covered by descriptors at
        that depth or deeper. Result sorted by ascending depth, ties by id.
        """
        phenomena = phenomena or {}
        hits = []
        for desc in self._models.values():
            if desc.slot != slot:
                continue
            ok = True
            for tag, min_depth in phenomena.items():
                if tag not in desc.provided_phenomena:
                    ok = False
                    break
                if min_depth is not None and desc.depth < min_depth:
                    ok = False
                    break
            if ok:
                hits.append(desc)
        hits.sort(key=lambda d: (d.depth, d.id))
        return hits

    def check_suitability(
        self, config: ModelConfiguration, req: RequirementSpec
    ) -> tuple[bool, set[str]]:
        """Metadata set-cover of the requirement by the bound models."""
        bound = [self.get(b.model_id) for b in config.bindings.values()]
        missing = set()
        for tag, min_depth in req.required_phenomena.items():
            covered = any(
                tag in desc.provided_phenomena
                and (min_depth is None or desc.depth >= min_depth)
                for desc in bound
            )
            if not covered:
                missing.add(tag)
        return (not missing, missing)

    def config_output_signals(self, config: ModelConfiguration) -> set[str]:
        out: set[str] = set()
        for binding in config.bindings.values():
            out |= self.get(binding.model_id).output_signals()
        return out

    # -- validation -------------------------------------------------------

    def validate_configuration(self, config: ModelConfiguration) -> list[str]:
        """All invariant violations of a configuration (empty when valid)."""
        problems: list[str] = []
        descriptors: dict[str, ModelDescriptor] = {}
        for slot, binding in config.bindings.items():
            desc = self._models.get(binding.model_id)
            if desc is None:
                problems.append(f"unknown model id {binding.model_id!r} in slot {slot!r}")
                continue
            if desc.slot != slot:
                problems.append(
                    f"model {binding.model_id!r} is for slot {desc.slot!r}, bound to {slot!r}"
                )
            descriptors[slot] = desc
            for name, value in binding.params.items():
                tun = desc.tunable(name)
                if tun is None:
                    problems.append(f"{slot}: parameter {name!r} not declared")
                elif not (tun.lower <= value <= tun.upper):
                    problems.append(
                        f"{slot}: parameter {name!r} = {value} outside "
                        f"[{tun.lower}, {tun.upper}]"
                    )
        for coupling in config.couplings:
            src_desc = descriptors.get(coupling.src_slot)
            dst_desc = descriptors.get(coupling.dst_slot)
            if src_desc is None or dst_desc is None:
                problems.append(
                    f"coupling {coupling.src_slot}.{coupling.src_port} -> "
                    f"{coupling.dst_slot}.{coupling.dst_port} references unbound slot"
                )
                continue
            src = src_desc.port(coupling.src_port)
            dst = dst_desc.port(coupling.dst_port)
            if src is None or dst is None:
                problems.append(
                    f"coupling references unknown port "
                    f"{coupling.src_slot}.{coupling.src_port} -> "
                    f"{coupling.dst_slot}.{coupling.dst_port}"
                )
                continue
            if src.direction != "out" or dst.direction != "in":
                problems.append(
                    f"direction mismatch on coupling "
                    f"{coupling.src_slot}.{coupling.src_port} -> "
                    f"{coupling.dst_slot}.{coupling.dst_port}"
                )
            if src.signal != dst.signal:
                problems.append(
                    f"signal tag mismatch on coupling "
                    f"{coupling.src_slot}.{coupling.src_port} ({src.signal!r}) -> "
                    f"{coupling.dst_slot}.{coupling.dst_port} ({dst.signal!r})"
                )
        if self._has_cycle(config):
            problems.append("algebraic loop: coupling graph over ports is cyclic")
        return problems

    @staticmethod
    def _has_cycle(config: ModelConfiguration) -> bool:
        edges: dict[str, set[str]] = {}
        for c in config.couplings:
            edges.setdefault(c.src_slot, set()).add(c.dst_slot)
        state: dict[str, int] = {}  # 1 = visiting, 2 = done

        def visit(node: str) -> bool:
            state[node] = 1
            for nxt in edges.get(node, ()):
                mark = state.get(nxt)
                if mark == 1:
                    return True
                if mark is None and visit(nxt):
                    return True
            state[node] = 2
            return False

        return any(state.get(n) is None and visit(n) for n in list(edges))

    # -- candidate enumeration ---------------------------------------------

    def enumerate_candidates(
        self,
        req: RequirementSpec,
        current: ModelConfiguration,
        goal_directives: dict[str, str] | None = None,
        limit: int = 64,
    ) -> list[ModelConfiguration]:
        """Valid, functionally suitable alternatives to ``current``.

        Depth directives constrain each slot relative to the current
        binding (increase: strictly deeper, decrease: strictly shallower).
        Ordered by structural edit distance (changed slot bindings), then
        total depth, then id; the current configuration is excluded.
        """
        if limit < 1:
            raise ValueError("limit must be >= 1")
        goal_directives = goal_directives or {}
        slots = sorted(current.bindings)
        options: list[list[ModelDescriptor]] = []
        for slot in slots:
            current_depth = self.get(current.bindings[slot].model_id).depth
            directive = goal_directives.get(slot, DIRECTIVE_ANY)
            slot_models = [d for d in self._models.values() if d.slot == slot]
            if directive == DIRECTIVE_INCREASE:
                slot_models = [d for d in slot_models if d.depth > current_depth]
            elif directive == DIRECTIVE_DECREASE:
                slot_models = [d for d in slot_models if d.depth < current_depth]
            elif directive != DIRECTIVE_ANY:
                raise ValueError(f"unknown directive {directive!r} for slot {slot!r}")
            if not slot_models:
                raise NoSuitableCandidateError(
                    f"no model satisfies directive {directive!r} for slot {slot!r}"
                )
            options.append(sorted(slot_models, key=lambda d: (d.depth, d.id)))

        current_ids = current.model_ids()
        candidates: list[tuple[tuple, ModelConfiguration]] = []
        for combo in itertools.product(*options):
            ids = {slot: desc.id for slot, desc in zip(slots, combo)}
            if ids == current_ids:
                continue
            config = self._build_candidate(slots, combo, current)
            if config is None:
                continue
            if self.validate_configuration(config):
                continue
            suitable, _ = self.check_suitability(config, req)
            if not suitable:
                continue
            dist = sum(1 for slot in slots if ids[slot] != current_ids[slot])
            depth = sum(desc.depth for desc in combo)
            candidates.append(((dist, depth, config.id), config))

        if not candidates:
            raise NoSuitableCandidateError(
                "no configuration satisfies suitability and depth directives"
            )
        candidates.sort(key=lambda pair: pair[0])
        return [config for _, config in candidates[:limit]]

    def _build_candidate(
        self, slots, combo, current: ModelConfiguration
    ) -> ModelConfiguration | None:
        """Rewire the current coupling pattern onto a new model combo.

        Couplings are carried over by signal tag; if a replacement model
        lacks a port with the needed tag the combo is not buildable.
        """
        by_slot = {slot: desc for slot, desc in zip(slots, combo)}
        couplings = []
        for coupling in current.couplings:
            src_desc = by_slot.get(coupling.src_slot)
            dst_desc = by_slot.get(coupling.dst_slot)
            if src_desc is None or dst_desc is None:
                return None
            cur_src = self.get(current.bindings[coupling.src_slot].model_id)
            old_port = cur_src.port(coupling.src_port)
            if old_port is None:
                return None
            tag = old_port.signal
            src_port = next(
                (p for p in src_desc.ports if p.direction == "out" and p.signal == tag), None
            )
            dst_port = next(
                (p for p in dst_desc.ports if p.direction == "in" and p.signal == tag), None
            )
            if src_port is None or dst_port is None:
                return None
            couplings.append(
                Coupling(coupling.src_slot, src_port.name, coupling.dst_slot, dst_port.name)
            )
        bindings = {}
        for slot in slots:
            desc = by_slot[slot]
            if desc.id == current.bindings[slot].model_id:
                params = dict(current.bindings[slot].params)
            else:
                params = desc.nominal_params()
            bindings[slot] = Binding(desc.id, params)
        config_id = "cfg[" + ",".join(f"{slot}={by_slot[slot].id}" for slot in slots) + "]"
        return ModelConfiguration(id=config_id, bindings=bindings, couplings=couplings)


# -- manifest loading -------------------------------------------------------


def descriptor_from_obj(obj: dict) -> ModelDescriptor:
    """Build a descriptor from a manifest table (TOML) or JSON object."""
    try:
        ports = tuple(
            Port(name=str(p["name"]), direction=str(p["direction"]), signal=str(p["signal"]))
            for p in obj.get("port", obj.get("ports", []))
        )
        tunables = tuple(
            Tunable(
                name=str(t["name"]),
                unit=str(t.get("unit", "")),
                lower=float(t["lower"]),
                upper=float(t["upper"]),
                nominal=float(t["nominal"]),
            )
            for t in obj.get("tunable", obj.get("tunables", []))
        )
        return ModelDescriptor(
            id=str(obj["id"]),
            slot=str(obj["slot"]),
            depth=int(obj["depth"]),
            behavior_type=str(obj["behavior_type"]),
            range=frozenset(str(x) for x in obj.get("range", [])),
            width=frozenset(str(x) for x in obj.get("width", [])),
            provided_phenomena=frozenset(str(x) for x in obj.get("phenomena", [])),
            ports=ports,
            tunables=tunables,
            cost_rating=float(obj.get("cost_rating", 0.0)),
            compute_rating=float(obj.get("compute_rating", 0.0)),
            endpoint=obj.get("endpoint"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidDescriptorError(f"malformed descriptor entry: {exc}") from exc


def load_manifest(path: str) -> ModelPool:
    """Load and validate a pool manifest (TOML or JSON)."""
    if path.endswith(".json"):
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        entries = doc.get("models", doc if isinstance(doc, list) else [])
    else:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        entries = doc.get("model", [])
    pool = ModelPool()
    for entry in entries:
        pool.register_model(descriptor_from_obj(entry))
    return pool


def parse_phenomena(items) -> dict[str, int | None]:
    """Parse phenomenon tags, accepting 'tag' or 'tag:min_depth' strings."""
    out: dict[str, int | None] = {}
    for item in items:
        if isinstance(item, str):
            if ":" in item:
                tag, _, depth = item.partition(":")
                out[tag] = int(depth)
            else:
                out[item] = None
        else:
            out[str(item["tag"])] = int(item["min_depth"]) if "min_depth" in item else None
    return out


def edit_distance(a: ModelConfiguration, b: ModelConfiguration) -> int:
    """Number of slot bindings whose model id differs."""
    ids_a, ids_b = a.model_ids(), b.model_ids()
    slots = set(ids_a) | set(ids_b)
    return sum(1 for s in slots if ids_a.get(s) != ids_b.get(s))


def total_depth(pool: ModelPool, config: ModelConfiguration) -> int:
    return sum(pool.get(b.model_id).depth for b in config.bindings.values())


__all__ = [
    "Tunable",
    "Port",
    "ModelDescriptor",
    "RequirementSpec",
    "Binding",
    "Coupling",
    "ModelConfiguration",
    "ModelPool",
    "descriptor_from_obj",
    "load_manifest",
    "parse_phenomena",
    "edit_distance",
    "total_depth",
    "DIRECTIVE_INCREASE",
    "DIRECTIVE_DECREASE",
    "DIRECTIVE_ANY",
    "STATUS_ACTIVE",
    "STATUS_CANDIDATE",
    "STATUS_RETIRED",
]
