"""Release ledger and the multiple-release engine.

A ledger stores every (rho, value) pair released for one query.  A new
release at rho is sampled conditionally on its two closest stored
neighbors, which makes its marginal equal to a fresh release at rho while
every set of releases is post-processing of the least private one.

Two initializations are supported:

* ``rho_inf = inf`` (Gaussian only): the exact query value is kept as the
  right-hand sentinel and any rho > 0 can be released.
* finite ``rho_inf``: one release at rho_inf is drawn and the query value is
  discarded, so the stored state is itself rho_inf-private.  Requests above
  rho_inf are refused.
"""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .families import NoiseFamily, get_family
from .noise import DomainError

FORMAT_VERSION = 1


class BudgetExceededError(ValueError):
    """Requested rho is above the ledger's committed rho_inf."""


class SealedLedgerError(RuntimeError):
    """The release needs the exact query value, which this ledger does not hold."""


class LedgerFormatError(ValueError):
    """A ledger document could not be parsed."""


@dataclass
class Release:
    rho: float
    value: np.ndarray


@dataclass
class Ledger:
    mechanism: NoiseFamily
    sensitivity: float
    rho_inf: float
    shape: tuple
    entries: dict = field(default_factory=dict)
    secret: np.ndarray | None = None

    @property
    def rhos(self) -> list[float]:
        return sorted(self.entries)

    def __len__(self):
        return len(self.entries)

    def neighbors(self, rho: float):
        """Tightest enclosing pair ``(left, right)`` of ``Release`` objects.

        The rho = 0 sentinel has ``value=None``; the rho = inf sentinel carries
        the exact query value (``None`` if sealed).  If rho is stored already,
        ``left`` is that entry.
        """
        if not rho > 0:
            raise DomainError(f"rho must be > 0, got {rho}")
        if rho > self.rho_inf:
            raise BudgetExceededError(f"rho={rho} exceeds rho_inf={self.rho_inf}")
        rhos = self.rhos
        i = bisect.bisect_left(rhos, rho)
        if i < len(rhos) and rhos[i] == rho:
            return Release(rho, self.entries[rho]), None
        left = Release(rhos[i - 1], self.entries[rhos[i - 1]]) if i > 0 else Release(0.0, None)
        if i < len(rhos):
            right = Release(rhos[i], self.entries[rhos[i]])
        else:
            right = Release(math.inf, self.secret)
        return left, right

    def release(self, rho: float, rng) -> np.ndarray:
        """Release the query at privacy level ``rho`` and record it."""
        rho = float(rho)
        left, right = self.neighbors(rho)
        if right is None:
            return left.value.copy()
        if right.value is None:
            raise SealedLedgerError("ledger holds no exact value; cannot release above its largest rho")
        fam = self.mechanism
        if left.value is None:
            if math.isinf(right.rho):
                value = right.value + fam.base(rho, self.sensitivity, rng, self.shape)
            else:
                value = right.value + fam.bridge(right.rho, rho, self.sensitivity, rng, self.shape)
        else:
            value = fam.between(left.rho, left.value, rho, right.rho, right.value, self.sensitivity, rng)
        value = np.asarray(value, dtype=float).reshape(self.shape)
        self.entries[rho] = value
        return value.copy()

    def releases(self) -> list[Release]:
        return [Release(r, self.entries[r].copy()) for r in self.rhos]

    # -- persistence -------------------------------------------------------

    def to_document(self, trusted: bool = False) -> dict:
        if len(self.shape) != 1:
            raise ValueError("only one-dimensional ledgers can be serialized")
        doc = {
            "version": FORMAT_VERSION,
            "mechanism": self.mechanism.tag,
            "sensitivity": self.sensitivity,
            "rho_inf": _encode_extended(self.rho_inf),
            "dimension": self.shape[0],
            "entries": [{"rho": r, "value": self.entries[r].tolist()} for r in self.rhos],
        }
        if trusted and self.secret is not None:
            doc["secret"] = self.secret.tolist()
        return doc

    @classmethod
    def from_document(cls, doc: dict) -> "Ledger":
        try:
            if doc["version"] != FORMAT_VERSION:
                raise LedgerFormatError(f"unsupported ledger version {doc['version']}")
            dim = int(doc["dimension"])
            entries = {}
            for e in doc["entries"]:
                v = np.asarray(e["value"], dtype=float)
                if v.shape != (dim,):
                    raise LedgerFormatError("entry length does not match dimension")
                entries[float(e["rho"])] = v
            secret = doc.get("secret")
            if secret is not None:
                secret = np.asarray(secret, dtype=float)
                if secret.shape != (dim,):
                    raise LedgerFormatError("secret length does not match dimension")
            ledger = cls(
                mechanism=get_family(doc["mechanism"]),
                sensitivity=float(doc["sensitivity"]),
                rho_inf=_decode_extended(doc["rho_inf"]),
                shape=(dim,),
                entries=entries,
                secret=secret,
            )
        except (KeyError, TypeError) as exc:
            raise LedgerFormatError(f"malformed ledger document: {exc}") from exc
        if not math.isinf(ledger.rho_inf) and ledger.secret is not None:
            raise LedgerFormatError("bounded ledgers must not carry the query value")
        return ledger

    def dumps(self, trusted: bool = False) -> str:
        return json.dumps(self.to_document(trusted), indent=1)

    @classmethod
    def loads(cls, text: str) -> "Ledger":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise LedgerFormatError(f"ledger is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise LedgerFormatError("ledger document must be a JSON object")
        return cls.from_document(doc)


def _encode_extended(x):
    return "inf" if math.isinf(x) else x


def _decode_extended(x):
    if x == "inf":
        return math.inf
    return float(x)


def ledger_init(query_value, sensitivity, mechanism, rho_inf=math.inf, rng=None) -> Ledger:
    """Create a ledger for ``query_value``.

    With a finite ``rho_inf`` an ``rng`` is required to draw the stored
    release; the query value itself is not kept.
    """
    fam = get_family(mechanism)
    value = np.array(query_value, dtype=float)
    if value.ndim == 0:
        value = value.reshape(1)
    if not sensitivity > 0:
        raise DomainError(f"sensitivity must be > 0, got {sensitivity}")
    if not rho_inf > 0:
        raise DomainError(f"rho_inf must be > 0, got {rho_inf}")
    ledger = Ledger(fam, float(sensitivity), float(rho_inf), value.shape)
    if math.isinf(rho_inf):
        if not fam.supports_unbounded:
            raise ValueError(f"rho_inf = inf is only supported for the Gaussian family, not {fam.tag}")
        ledger.secret = value
    else:
        if rng is None:
            raise ValueError("a random generator is needed to initialize a bounded ledger")
        ledger.entries[float(rho_inf)] = value + fam.base(rho_inf, sensitivity, rng, value.shape)
    return ledger


def save_ledger(ledger: Ledger, path, trusted: bool = False):
    with open(path, "w") as fh:
        fh.write(ledger.dumps(trusted))


def load_ledger(path) -> Ledger:
    with open(path) as fh:
        return Ledger.loads(fh.read())
