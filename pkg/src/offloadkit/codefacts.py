"""Offloading constraint analysis over a code-facts document.

A facts document lists an application's types (with supertypes, fields and
methods) plus the types it references from libraries.  For every method we
decide whether it can be migrated as is, whether it could be with changes
confined to application code, and whether it touches device-bound hardware or
unsynchronized local storage, directly or through its callees.
"""

from __future__ import annotations

import json
import logging
import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

PRIMITIVES = frozenset(
    {"boolean", "byte", "char", "short", "int", "long", "float", "double", "void"}
)

DEFAULT_ALWAYS_SERIALIZABLE = (
    "java.lang.String",
    "java.lang.Boolean",
    "java.lang.Byte",
    "java.lang.Character",
    "java.lang.Short",
    "java.lang.Integer",
    "java.lang.Long",
    "java.lang.Float",
    "java.lang.Double",
    "java.lang.Number",
    "java.math.BigInteger",
    "java.math.BigDecimal",
    "java.util.Date",
    "java.util.ArrayList",
    "java.util.LinkedList",
    "java.util.HashMap",
    "java.util.HashSet",
    "java.util.TreeMap",
)

# six subsystems named for the original tool plus fourteen more; editable in the run config
DEFAULT_HARDWARE_CATALOG = (
    "ui.notification",
    "ui.display",
    "hw.vibrate",
    "hw.bluetooth",
    "hw.wifi",
    "hw.usb",
    "ui.toast",
    "ui.dialog",
    "ui.widget",
    "hw.camera",
    "hw.location",
    "hw.sensor",
    "hw.microphone",
    "hw.speaker",
    "hw.nfc",
    "hw.telephony",
    "hw.sms",
    "hw.wakelock",
    "hw.flashlight",
    "hw.battery",
)

DEFAULT_FILESYSTEM_TAGS = ("fs.shared_preferences", "fs.file")

NONE, DIRECT, TRANSITIVE = "none", "direct", "transitive"


class FactsFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ApiAccess:
    subsystem: str
    site: str = ""


@dataclass(frozen=True)
class MethodFact:
    owner: str
    name: str
    params: tuple[str, ...] = ()
    returns: str = "void"
    calls: tuple[tuple[str, str], ...] = ()
    api_accesses: tuple[ApiAccess, ...] = ()

    @property
    def signature(self) -> str:
        return f"{self.name}({';'.join(self.params)})"

    @property
    def ref(self) -> str:
        return f"{self.owner}.{self.signature}"


@dataclass(frozen=True)
class TypeFact:
    name: str
    kind: str = "class"
    is_library: bool = False
    declares_serializable: bool = False
    supertypes: tuple[str, ...] = ()
    fields: tuple[tuple[str, str], ...] = ()
    external_unknown: bool = False


@dataclass
class CodeFactsDb:
    types: dict[str, TypeFact] = field(default_factory=dict)
    methods: list[MethodFact] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self._by_name: dict[tuple[str, str], list[int]] = {}
        for i, m in enumerate(self.methods):
            self._by_name.setdefault((m.owner, m.name), []).append(i)

    def lookup(self, owner: str, name: str) -> list[int]:
        """Indices of all overloads of ``owner.name``."""
        return self._by_name.get((owner, name), [])

    def callees(self, index: int) -> list[int]:
        out = []
        for owner, name in self.methods[index].calls:
            out.extend(self.lookup(owner, name))
        return out


@dataclass(frozen=True)
class ConstraintConfig:
    always_serializable: frozenset[str] = frozenset(DEFAULT_ALWAYS_SERIALIZABLE)
    hardware_catalog: frozenset[str] = frozenset(DEFAULT_HARDWARE_CATALOG)
    filesystem_tags: frozenset[str] = frozenset(DEFAULT_FILESYSTEM_TAGS)

    def __post_init__(self):
        for name in ("always_serializable", "hardware_catalog", "filesystem_tags"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))


@dataclass(frozen=True)
class Blocker:
    kind: str
    subject: str
    explanation: str


@dataclass(frozen=True)
class Verdict:
    ok: bool
    blockers: tuple[Blocker, ...] = ()

    def __bool__(self):
        return self.ok


@dataclass(frozen=True)
class AccessVerdict:
    level: str
    blockers: tuple[Blocker, ...] = ()


@dataclass(frozen=True)
class ConstraintFinding:
    method: MethodFact
    directly_migratable: bool
    convertible: bool
    hardware: str
    filesystem: str
    blockers: tuple[Blocker, ...]

    def __post_init__(self):
        if self.directly_migratable and not self.convertible:
            raise ValueError("directly migratable method must also be convertible")
        if self.hardware == DIRECT and not any(b.kind == "hardware" for b in self.blockers):
            raise ValueError("direct hardware verdict without a hardware blocker")


_TYPE_SPLIT = re.compile(r"[<>,]")


def type_components(expr: str) -> list[str]:
    """Erased base names mentioned by a type expression.

    ``java.util.List<com.a.Foo>[]`` -> ``["java.util.List", "com.a.Foo"]``.
    Wildcards contribute their bound, if any.
    """
    out = []
    for tok in _TYPE_SPLIT.split(expr):
        tok = tok.strip().replace("[]", "").strip()
        if tok.startswith("?"):
            tok = tok[1:].strip()
            for kw in ("extends", "super"):
                if tok.startswith(kw):
                    tok = tok[len(kw):].strip()
        if tok and tok not in out:
            out.append(tok)
    return out


def _as_list(value, what: str) -> list:
    if value is None:
        return []
    if not isinstance(value, list):
        raise FactsFormatError(f"{what} must be an array")
    return value


def _text(obj: Mapping, key: str, what: str, default=None) -> str:
    value = obj.get(key, default)
    if not isinstance(value, str) or (default is None and not value):
        raise FactsFormatError(f"{what}: '{key}' must be a non-empty string")
    return value


def load_facts(document, always_serializable: Iterable[str] = DEFAULT_ALWAYS_SERIALIZABLE) -> CodeFactsDb:
    """Validate a facts document (JSON text, bytes, or already-parsed mapping).

    Referenced types that are not declared are registered as external
    library types of unknown content, with a warning (except for primitives
    and names in ``always_serializable``).
    """
    if isinstance(document, (bytes, bytearray)):
        document = document.decode("utf-8")
    if isinstance(document, str):
        if not document.strip():
            document = {}
        else:
            try:
                document = json.loads(document)
            except json.JSONDecodeError as exc:
                raise FactsFormatError(f"malformed facts document: {exc}") from None
    if not isinstance(document, Mapping):
        raise FactsFormatError("facts document must be an object")

    types: dict[str, TypeFact] = {}
    methods: list[MethodFact] = []
    for k, t in enumerate(_as_list(document.get("types"), "types")):
        if not isinstance(t, Mapping):
            raise FactsFormatError(f"types[{k}] must be an object")
        name = _text(t, "name", f"types[{k}]")
        if name in types:
            raise FactsFormatError(f"duplicate type name {name}")
        kind = t.get("kind", "class")
        if kind not in ("class", "interface"):
            raise FactsFormatError(f"{name}: kind must be 'class' or 'interface'")
        fields_ = []
        for f in _as_list(t.get("fields"), f"{name}.fields"):
            if not isinstance(f, Mapping):
                raise FactsFormatError(f"{name}: field entries must be objects")
            fields_.append((_text(f, "name", f"{name} field"), _text(f, "type", f"{name} field")))
        supers = _as_list(t.get("supertypes"), f"{name}.supertypes")
        if not all(isinstance(s, str) and s for s in supers):
            raise FactsFormatError(f"{name}: supertypes must be strings")
        for flag in ("is_library", "declares_serializable"):
            if not isinstance(t.get(flag, False), bool):
                raise FactsFormatError(f"{name}: {flag} must be a boolean")
        types[name] = TypeFact(
            name, kind, t.get("is_library", False), t.get("declares_serializable", False),
            tuple(supers), tuple(fields_),
        )
        for m in _as_list(t.get("methods"), f"{name}.methods"):
            if not isinstance(m, Mapping):
                raise FactsFormatError(f"{name}: method entries must be objects")
            mname = _text(m, "name", f"{name} method")
            params = _as_list(m.get("params"), f"{name}.{mname}.params")
            if not all(isinstance(p, str) and p for p in params):
                raise FactsFormatError(f"{name}.{mname}: params must be type names")
            calls = []
            for c in _as_list(m.get("calls"), f"{name}.{mname}.calls"):
                if not isinstance(c, Mapping):
                    raise FactsFormatError(f"{name}.{mname}: call entries must be objects")
                calls.append((_text(c, "owner", "call"), _text(c, "method", "call")))
            accesses = []
            for a in _as_list(m.get("api_accesses"), f"{name}.{mname}.api_accesses"):
                if not isinstance(a, Mapping):
                    raise FactsFormatError(f"{name}.{mname}: api_accesses entries must be objects")
                accesses.append(ApiAccess(_text(a, "subsystem", "api access"), str(a.get("site", ""))))
            methods.append(MethodFact(
                name, mname, tuple(params), _text(m, "return", f"{name}.{mname}", "void"),
                tuple(calls), tuple(accesses),
            ))

    warnings: list[str] = []
    quiet = set(always_serializable) | PRIMITIVES

    def resolve(expr: str, where: str):
        for comp in type_components(expr):
            if comp in types or comp in PRIMITIVES:
                continue
            types[comp] = TypeFact(comp, is_library=True, external_unknown=True)
            if comp not in quiet:
                warnings.append(f"{where}: undeclared type {comp} registered as external")

    for t in list(types.values()):
        if t.external_unknown:
            continue
        for s in t.supertypes:
            resolve(s, t.name)
        for fname, ftype in t.fields:
            resolve(ftype, f"{t.name}.{fname}")
    for m in methods:
        for p in m.params:
            resolve(p, m.ref)
        resolve(m.returns, m.ref)

    db = CodeFactsDb(types, methods, warnings)
    for m in methods:
        for owner, name in m.calls:
            if not db.lookup(owner, name):
                warnings.append(f"{m.ref}: call to unknown method {owner}.{name} ignored")
    for w in warnings:
        log.warning(w)
    return db


class _Serializability:
    def __init__(self, db: CodeFactsDb, cfg: ConstraintConfig):
        self.db = db
        self.cfg = cfg
        self._memo: dict[str, bool] = {}

    def type(self, name: str) -> bool:
        if name in self._memo:
            return self._memo[name]
        # supertype cycles are malformed but must not loop
        self._memo[name] = False
        ok = name in PRIMITIVES or name in self.cfg.always_serializable
        t = self.db.types.get(name)
        if not ok and t is not None:
            ok = t.declares_serializable or any(self.expr(s) for s in t.supertypes)
        self._memo[name] = ok
        return ok

    def expr(self, expr: str) -> bool:
        return all(self.type(c) for c in type_components(expr))


def _signature_types(method: MethodFact) -> list[tuple[str, str]]:
    out = [("owner", method.owner)]
    out += [(f"parameter {i}", p) for i, p in enumerate(method.params)]
    out.append(("return type", method.returns))
    return out


def directly_migratable(db: CodeFactsDb, method: MethodFact,
                        cfg: ConstraintConfig | None = None) -> Verdict:
    """Owner, parameter and return types all serializable (primitives and void count)."""
    ser = _Serializability(db, cfg or ConstraintConfig())
    blockers = []
    for role, expr in _signature_types(method):
        for comp in type_components(expr):
            if not ser.type(comp):
                blockers.append(Blocker("not-serializable", comp, f"{role} {comp} is not serializable"))
    return Verdict(not blockers, tuple(blockers))


def _type_deps(t: TypeFact) -> list[str]:
    deps = []
    for expr in list(t.supertypes) + [ftype for _, ftype in t.fields]:
        for comp in type_components(expr):
            if comp not in deps:
                deps.append(comp)
    return deps


def convertible_set(db: CodeFactsDb, cfg: ConstraintConfig | None = None,
                    order: Sequence[str] | None = None) -> frozenset[str]:
    """Types that are serializable or can be made so by editing application code.

    Greatest fixed point: start from every serializable type plus every
    application type, then drop application types with a supertype or field
    type that is neither serializable nor still in the set, until stable.
    ``order`` only changes the visiting order; the result does not depend on it.
    """
    cfg = cfg or ConstraintConfig()
    ser = _Serializability(db, cfg)
    members = {n for n, t in db.types.items() if ser.type(n) or not t.is_library}
    candidates = list(order) if order is not None else list(db.types)
    candidates = [n for n in candidates if n in db.types and not db.types[n].is_library]
    deps = {n: _type_deps(db.types[n]) for n in candidates}

    def ok(d: str) -> bool:
        return d in members or ser.type(d)

    changed = True
    while changed:
        changed = False
        for n in candidates:
            if n in members and not all(ok(d) for d in deps[n]):
                members.discard(n)
                changed = True
    return frozenset(members)


def removal_pass(db: CodeFactsDb, members: frozenset[str],
                 cfg: ConstraintConfig | None = None) -> frozenset[str]:
    """One removal sweep over ``members``; a fixed point comes back unchanged."""
    ser = _Serializability(db, cfg or ConstraintConfig())
    keep = set(members)
    for n in members:
        t = db.types.get(n)
        if t is None or t.is_library:
            continue
        if not all(d in members or ser.type(d) for d in _type_deps(t)):
            keep.discard(n)
    return frozenset(keep)


def migratable_with_minor_changes(db: CodeFactsDb, method: MethodFact,
                                  convertible: frozenset[str] | None = None,
                                  cfg: ConstraintConfig | None = None) -> Verdict:
    cfg = cfg or ConstraintConfig()
    if convertible is None:
        convertible = convertible_set(db, cfg)
    ser = _Serializability(db, cfg)
    blockers = []
    for role, expr in _signature_types(method):
        for comp in type_components(expr):
            if not (ser.type(comp) or comp in convertible):
                t = db.types.get(comp)
                why = "library type" if t is None or t.is_library else "has non-convertible members"
                blockers.append(Blocker("not-convertible", comp, f"{role} {comp}: {why}"))
    return Verdict(not blockers, tuple(blockers))


def _access_constraints(db: CodeFactsDb, method_index: int, tags: frozenset[str],
                        kind: str) -> AccessVerdict:
    method = db.methods[method_index]
    direct = [a for a in method.api_accesses if a.subsystem in tags]
    if direct:
        return AccessVerdict(DIRECT, tuple(
            Blocker(kind, a.subsystem, f"{method.ref} accesses {a.subsystem}"
                    + (f" at {a.site}" if a.site else ""))
            for a in direct
        ))
    blockers = []
    seen = {method_index}
    stack = list(reversed(db.callees(method_index)))
    while stack:
        j = stack.pop()
        if j in seen:
            continue
        seen.add(j)
        callee = db.methods[j]
        for a in callee.api_accesses:
            if a.subsystem in tags:
                blockers.append(Blocker(kind, a.subsystem, f"reaches {callee.ref} which accesses {a.subsystem}"))
        stack.extend(reversed(db.callees(j)))
    return AccessVerdict(TRANSITIVE if blockers else NONE, tuple(blockers))


def _index_of(db: CodeFactsDb, method) -> int:
    if isinstance(method, int):
        return method
    for i, m in enumerate(db.methods):
        if m is method:
            return i
    return db.methods.index(method)


def hardware_constraints(db: CodeFactsDb, method, catalog: Iterable[str] | None = None) -> AccessVerdict:
    tags = frozenset(catalog) if catalog is not None else frozenset(DEFAULT_HARDWARE_CATALOG)
    return _access_constraints(db, _index_of(db, method), tags, "hardware")


def filesystem_constraints(db: CodeFactsDb, method, tags: Iterable[str] | None = None) -> AccessVerdict:
    """Local-storage access that would diverge between device and server."""
    tags = frozenset(tags) if tags is not None else frozenset(DEFAULT_FILESYSTEM_TAGS)
    return _access_constraints(db, _index_of(db, method), tags, "filesystem")


def analyze(db: CodeFactsDb, cfg: ConstraintConfig | None = None) -> list[ConstraintFinding]:
    """All four verdicts for every method, in document order."""
    cfg = cfg or ConstraintConfig()
    conv = convertible_set(db, cfg)
    findings = []
    for i, m in enumerate(db.methods):
        direct = directly_migratable(db, m, cfg)
        minor = migratable_with_minor_changes(db, m, conv, cfg)
        hw = _access_constraints(db, i, cfg.hardware_catalog, "hardware")
        fs = _access_constraints(db, i, cfg.filesystem_tags, "filesystem")
        findings.append(ConstraintFinding(
            m, direct.ok, minor.ok, hw.level, fs.level,
            direct.blockers + minor.blockers + hw.blockers + fs.blockers,
        ))
    return findings


FINDINGS_HEADER = "owner,method,directly_migratable,convertible_minor,hardware,filesystem,blocker_count\n"


def format_findings(findings: Sequence[ConstraintFinding]) -> str:
    out = [FINDINGS_HEADER]
    for f in findings:
        out.append(
            f"{f.method.owner},{f.method.signature},{str(f.directly_migratable).lower()},"
            f"{str(f.convertible).lower()},{f.hardware},{f.filesystem},{len(f.blockers)}\n"
        )
    return "".join(out)


@dataclass(frozen=True)
class ConstraintStats:
    total: int
    directly_migratable: int
    minor_changes: int
    hardware: int
    filesystem: int

    @property
    def empty(self) -> bool:
        return self.total == 0

    def percent(self, count: int) -> Decimal:
        if self.total == 0:
            return Decimal("0.0")
        return (Decimal(100 * count) / Decimal(self.total)).quantize(Decimal("0.1"), ROUND_HALF_UP)

    def rows(self) -> list[tuple[str, int, Decimal | None]]:
        return [
            ("Number of methods", self.total, None),
            ("Directly migratable", self.directly_migratable, self.percent(self.directly_migratable)),
            ("Migratable with minor changes", self.minor_changes, self.percent(self.minor_changes)),
            ("Hardware access constraints", self.hardware, self.percent(self.hardware)),
            ("Potential unexpected behavior because of access to file system",
             self.filesystem, self.percent(self.filesystem)),
        ]


def summarize_stats(findings: Sequence[ConstraintFinding]) -> ConstraintStats:
    """Counts behind the per-application statistics table; hardware and file
    system counts include both direct and transitive access."""
    return ConstraintStats(
        total=len(findings),
        directly_migratable=sum(f.directly_migratable for f in findings),
        minor_changes=sum(f.convertible for f in findings),
        hardware=sum(f.hardware != NONE for f in findings),
        filesystem=sum(f.filesystem != NONE for f in findings),
    )


def format_stats(stats: ConstraintStats) -> str:
    out = [
        "# hardware and file system rows count direct and transitive access\n",
        "# member classes are declared field types\n",
        f"# empty={str(stats.empty).lower()}\n",
        "statistic,count,percent\n",
    ]
    for label, count, pct in stats.rows():
        out.append(f"{label},{count},{'' if pct is None else pct}\n")
    return "".join(out)
