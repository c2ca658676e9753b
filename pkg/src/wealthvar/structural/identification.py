"""Structural impact matrices: recursive (Cholesky) and sign/zero restrictions."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import ConfigError, IdentificationError
from ..probkernel import RngStream, chol, ma_coefficients

log = logging.getLogger(__name__)

SIGNS = ("+", "-", "0")


@dataclass(frozen=True)
class Restriction:
    variable: str
    sign: str
    horizons: tuple[int, ...] = (0,)

    def __post_init__(self):
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))
        if self.sign not in SIGNS:
            raise ConfigError(f"restriction sign must be one of {SIGNS}, got {self.sign!r}")
        if not self.horizons or min(self.horizons) < 0:
            raise ConfigError(f"restriction horizons must be non-negative, got {self.horizons}")
        if self.sign == "0" and self.horizons != (0,):
            raise ConfigError(f"zero restriction on {self.variable!r} must be contemporaneous only")


@dataclass(frozen=True)
class SignRestrictionSpec:
    """Restrictions characterising one structural shock."""

    restrictions: tuple[Restriction, ...]

    def __post_init__(self):
        object.__setattr__(self, "restrictions", tuple(self.restrictions))
        if not self.restrictions:
            raise ConfigError("a sign-restriction spec needs at least one restriction")
        names = [r.variable for r in self.restrictions]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate restricted variables {names}")

    @classmethod
    def from_mapping(cls, m: Mapping) -> "SignRestrictionSpec":
        """``{"spread": "-", "cpi": {"sign": "+", "horizons": [0, 1]}}``."""
        out = []
        for var, v in m.items():
            if isinstance(v, Mapping):
                out.append(Restriction(var, str(v["sign"]), tuple(v.get("horizons", (0,)))))
            else:
                out.append(Restriction(var, str(v)))
        return cls(tuple(out))

    @property
    def zero_variables(self) -> list[str]:
        return [r.variable for r in self.restrictions if r.sign == "0"]

    @property
    def max_horizon(self) -> int:
        return max(max(r.horizons) for r in self.restrictions)


@dataclass(frozen=True)
class IdentificationScheme:
    """How to map reduced-form innovations to structural shocks.

    ``kind="cholesky"`` uses the recursive ordering (default: model order)
    and ``shock`` names the ordered variable whose innovation is the shock.
    ``kind="sign"`` draws rotations until every shock in ``sign_restrictions``
    is matched; ``shock`` picks the shock of interest among them. Responses
    are scaled so the impact on ``normalize_on`` equals ``shock_size``; with
    ``shock_size=None`` a one standard deviation shock is used.
    """

    kind: str
    shock: str
    ordering: tuple[str, ...] | None = None
    sign_restrictions: Mapping[str, SignRestrictionSpec] = field(default_factory=dict)
    shock_size: float | None = -0.20
    normalize_on: str | None = None
    max_tries: int = 10_000
    median_target: bool = False
    candidates_per_draw: int = 10

    def __post_init__(self):
        if self.ordering is not None:
            object.__setattr__(self, "ordering", tuple(self.ordering))
        object.__setattr__(self, "sign_restrictions", dict(self.sign_restrictions))
        if self.kind not in ("cholesky", "sign"):
            raise ConfigError(f"identification kind must be 'cholesky' or 'sign', got {self.kind!r}")
        if self.max_tries < 1 or self.candidates_per_draw < 1:
            raise ConfigError("max_tries and candidates_per_draw must be >= 1")
        if self.kind == "sign" and self.shock not in self.sign_restrictions:
            raise ConfigError(f"shock {self.shock!r} has no sign restrictions; have {list(self.sign_restrictions)}")

    def validate(self, variables: Sequence[str]) -> None:
        variables = tuple(variables)
        if self.ordering is not None and sorted(self.ordering) != sorted(variables):
            raise ConfigError(f"ordering {self.ordering} must list each of {variables} exactly once")
        if self.kind == "cholesky" and self.shock not in variables:
            raise ConfigError(f"Cholesky shock {self.shock!r} is not a model variable")
        for name, spec in self.sign_restrictions.items():
            for r in spec.restrictions:
                if r.variable not in variables:
                    raise ConfigError(f"restriction on unknown variable {r.variable!r} (shock {name!r})")
        if len(self.sign_restrictions) > len(variables):
            raise ConfigError("more restricted shocks than variables")
        if self.normalize_on is not None and self.normalize_on not in variables:
            raise ConfigError(f"normalize_on {self.normalize_on!r} is not a model variable")

    def normalizing_variable(self) -> str:
        if self.normalize_on is not None:
            return self.normalize_on
        if self.kind == "cholesky":
            return self.shock
        for r in self.sign_restrictions[self.shock].restrictions:
            if r.sign != "0":
                return r.variable
        raise ConfigError(f"shock {self.shock!r} has only zero restrictions; set normalize_on")

    def shock_labels(self, variables: Sequence[str]) -> tuple[str, ...]:
        if self.kind == "cholesky":
            return tuple(self.ordering or variables)
        named = list(self.sign_restrictions)
        return tuple(named + [f"unidentified{i + 1}" for i in range(len(variables) - len(named))])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "shock": self.shock, "ordering": list(self.ordering) if self.ordering else None,
            "sign_restrictions": {s: [[r.variable, r.sign, list(r.horizons)] for r in spec.restrictions]
                                  for s, spec in self.sign_restrictions.items()},
            "shock_size": self.shock_size, "normalize_on": self.normalize_on, "max_tries": self.max_tries,
            "median_target": self.median_target, "candidates_per_draw": self.candidates_per_draw,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "IdentificationScheme":
        d = dict(d)
        signs = {s: SignRestrictionSpec.from_mapping(m) for s, m in dict(d.pop("restrictions", {})).items()}
        try:
            return cls(sign_restrictions=signs, **d)
        except TypeError as e:
            raise ConfigError(f"bad identification options: {e}") from None


def ump_scheme(policy="shadow_rate", spread="spread", cpi="cpi", ip="ip", neer="neer", **kw) -> IdentificationScheme:
    """Expansionary unconventional policy: rate and spread down, prices and output up, currency down."""
    spec = SignRestrictionSpec((Restriction(policy, "-"), Restriction(spread, "-"), Restriction(cpi, "+"),
                                Restriction(ip, "+"), Restriction(neer, "-")))
    return IdentificationScheme("sign", "ump", sign_restrictions={"ump": spec}, normalize_on=policy, **kw)


def balance_sheet_scheme(policy="shadow_rate", spread="spread", cpi="cpi", ip="ip", shock_size=-0.20,
                         **kw) -> IdentificationScheme:
    """Balance-sheet expansion: output and prices up, spread down, policy rate unchanged on impact.

    The policy rate cannot normalise a shock it does not move, so the spread does.
    """
    spec = SignRestrictionSpec((Restriction(ip, "+"), Restriction(cpi, "+"), Restriction(spread, "-"),
                                Restriction(policy, "0")))
    return IdentificationScheme("sign", "balance_sheet", sign_restrictions={"balance_sheet": spec},
                                normalize_on=spread, shock_size=shock_size, **kw)


@dataclass(frozen=True)
class Identification:
    """Impact matrices A0 (draws, n, n), A0 A0' = Sigma, columns labelled by ``shocks``."""

    impact: np.ndarray
    draw_index: np.ndarray
    shocks: tuple[str, ...]
    variables: tuple[str, ...]
    scheme: IdentificationScheme
    tries: np.ndarray
    n_skipped: int = 0

    @property
    def acceptance_rate(self) -> float:
        accepted = len(self.draw_index) * (self.scheme.candidates_per_draw if self.scheme.median_target else 1)
        return accepted / max(int(self.tries.sum()), 1)

    def column(self, shock: str | None = None) -> int:
        return self.shocks.index(shock or self.scheme.shock)


def cholesky_impact(sigma: np.ndarray, order_idx: np.ndarray) -> np.ndarray:
    """Lower-triangular factor under ``order_idx``, returned in model row order."""
    S = sigma[np.ix_(order_idx, order_idx)]
    L = chol(S, context="innovation covariance")
    A0 = np.empty_like(L)
    A0[order_idx, :] = L
    return A0


def eigen_factor(sigma: np.ndarray) -> np.ndarray:
    """P D^{1/2} from the eigen-decomposition Sigma = P D P'."""
    d, P = np.linalg.eigh(0.5 * (sigma + sigma.T))
    return P * np.sqrt(np.clip(d, 0.0, None))


def _null_projected(M: np.ndarray | None, v: np.ndarray) -> np.ndarray | None:
    """Project ``v`` onto the null space of M's rows and normalise."""
    if M is not None and M.shape[0]:
        _, s, Vt = np.linalg.svd(M)
        rank = int(np.sum(s > 1e-12 * max(s[0], 1e-300)))
        R = Vt[:rank]
        v = v - R.T @ (R @ v)
    nrm = np.linalg.norm(v)
    return v / nrm if nrm > 1e-12 else None


def candidate_rotation(base: np.ndarray, zero_rows: list[list[int]], K: np.ndarray) -> np.ndarray | None:
    """The rotation applied to ``base`` (so A0 = base @ rotation) from a standard-normal K.

    Without zero restrictions this is Q' where K = QR with a positive R
    diagonal. Otherwise column j is K[:, j] projected so that
    (base @ q_j)[zero_rows[j]] = 0 and q_j is orthogonal to earlier columns.
    """
    n = base.shape[0]
    if not any(zero_rows):
        Q, R = np.linalg.qr(K)
        Q = Q * np.sign(np.diag(R))
        return Q.T
    Q = np.empty((n, n))
    for j in range(n):
        rows = [base[zero_rows[j]]] if j < len(zero_rows) and zero_rows[j] else []
        if j:
            rows.append(Q[:, :j].T)
        M = np.vstack(rows) if rows else None
        q = _null_projected(M, K[:, j])
        if q is None:
            return None
        Q[:, j] = q
    return Q


class _SignChecker:
    """Evaluates restrictions on one posterior draw's response matrices."""

    def __init__(self, scheme: IdentificationScheme, variables: Sequence[str], psi: np.ndarray, scale: float):
        self.specs = [(name, [(variables.index(r.variable), r.sign, r.horizons) for r in spec.restrictions])
                      for name, spec in scheme.sign_restrictions.items()]
        self.psi = psi
        self.tol = 1e-9 * scale

    def holds(self, col: np.ndarray, rules) -> bool:
        for i, sign, hs in rules:
            for h in hs:
                x = col[i] if h == 0 else self.psi[h, i] @ col
                if sign == "+" and not x > 0:
                    return False
                if sign == "-" and not x < 0:
                    return False
                if sign == "0" and abs(x) > self.tol:
                    return False
        return True

    def assign(self, A0: np.ndarray, n_fixed: int) -> np.ndarray | None:
        """Columns matched to named shocks (sign-flipped where needed), then the rest.

        The first ``n_fixed`` columns were built for the first shocks' zero
        restrictions and may only be sign-flipped in place.
        """
        n = A0.shape[1]
        free = list(range(n_fixed, n))
        chosen = []
        for s, (name, rules) in enumerate(self.specs):
            cands = [s] if s < n_fixed else free
            hit = None
            for j in cands:
                for flip in (1.0, -1.0):
                    c = flip * A0[:, j]
                    if self.holds(c, rules):
                        hit = (j, c)
                        break
                if hit:
                    break
            if hit is None:
                return None
            if s >= n_fixed:
                free.remove(hit[0])
            chosen.append(hit[1])
        rest = [A0[:, j] for j in free]
        return np.column_stack(chosen + rest)

    def audit(self, A0: np.ndarray) -> bool:
        return all(self.holds(A0[:, s], rules) for s, (_, rules) in enumerate(self.specs))


def _zero_plan(scheme: IdentificationScheme, variables: Sequence[str]):
    """Reorder shocks so zero-restricted ones come first (most zeros first)."""
    names = list(scheme.sign_restrictions)
    zeros = {s: [variables.index(v) for v in scheme.sign_restrictions[s].zero_variables] for s in names}
    order = sorted(names, key=lambda s: -len(zeros[s]))
    n_fixed = sum(1 for s in order if zeros[s])
    if any(len(zeros[s]) > len(variables) - 1 - i for i, s in enumerate(order)):
        raise ConfigError("too many zero restrictions for the system size")
    return order, [zeros[s] for s in order[:n_fixed]], n_fixed


def _sign_candidates(scheme, variables, coefs, sigma, p, const, rng: RngStream, want: int):
    n = sigma.shape[0]
    order, zero_rows, n_fixed = _zero_plan(scheme, variables)
    ordered = IdentificationScheme("sign", scheme.shock, sign_restrictions={s: scheme.sign_restrictions[s] for s in order})
    maxh = max(spec.max_horizon for spec in scheme.sign_restrictions.values())
    psi = ma_coefficients(coefs, p, maxh, const) if maxh > 0 else None
    checker = _SignChecker(ordered, variables, psi, float(np.sqrt(np.max(np.diag(sigma)))))
    base = eigen_factor(sigma)
    g = rng.generator
    found, tries = [], 0
    perm = [order.index(s) for s in scheme.sign_restrictions]
    while tries < scheme.max_tries and len(found) < want:
        tries += 1
        Q = candidate_rotation(base, zero_rows, g.standard_normal((n, n)))
        if Q is None:
            continue
        A0 = checker.assign(base @ Q, n_fixed)
        if A0 is None:
            continue
        # back to the user's shock order
        m = len(order)
        A0 = np.column_stack([A0[:, perm[i]] for i in range(m)] + [A0[:, j] for j in range(m, n)])
        found.append(A0)
    return found, tries


def identify(draws, scheme: IdentificationScheme, rng: RngStream | None = None) -> Identification:
    """Impact matrix per posterior draw.

    Sign mode draws K with iid N(0, 1) entries, takes Q from its QR
    factorisation and forms A0 = P D^{1/2} Q; zero restrictions are met by
    building the affected columns in the null space of the restricted rows.
    Posterior draws where nothing is accepted within ``max_tries`` are
    skipped and counted. Per-draw randomness comes from ``rng.child(d)``.
    """
    spec = draws.spec
    variables = spec.variables
    scheme.validate(variables)
    shocks = scheme.shock_labels(variables)
    D = draws.n_draws
    if scheme.kind == "cholesky":
        order_idx = np.array([variables.index(v) for v in (scheme.ordering or variables)])
        impact = np.stack([cholesky_impact(draws.sigma[d], order_idx) for d in range(D)])
        return Identification(impact, np.arange(D), shocks, variables, scheme, np.ones(D, dtype=int), 0)

    if rng is None:
        raise ConfigError("sign-restriction identification needs a random stream")
    want = scheme.candidates_per_draw if scheme.median_target else 1
    cands, idx, tries = [], [], []
    for d in range(D):
        found, t = _sign_candidates(scheme, variables, draws.coefs[d], draws.sigma[d], spec.lags,
                                    spec.include_constant, rng.child(d), want)
        tries.append(t)
        if found:
            cands.append(found)
            idx.append(d)
    skipped = D - len(idx)
    if not idx:
        raise IdentificationError(f"no rotation satisfied the sign restrictions in {scheme.max_tries} tries "
                                  f"for any of {D} posterior draws", tries=int(sum(tries)))
    if skipped:
        log.warning("sign restrictions: %d of %d posterior draws had no accepted rotation and were skipped", skipped, D)
    m = len(scheme.sign_restrictions)
    if scheme.median_target:
        pooled = np.stack([c[:, :m] for cs in cands for c in cs])
        target = np.median(pooled, axis=0)
        chosen = [cs[int(np.argmin([np.linalg.norm(c[:, :m] - target) for c in cs]))] for cs in cands]
    else:
        chosen = [cs[0] for cs in cands]
    return Identification(np.stack(chosen), np.array(idx), shocks, variables, scheme, np.array(tries), skipped)


def audit_restrictions(ident: Identification, draws) -> np.ndarray:
    """Re-evaluate every restriction on every retained impact matrix; True where all hold."""
    spec = draws.spec
    scheme = ident.scheme
    if scheme.kind != "sign":
        return np.ones(len(ident.draw_index), dtype=bool)
    maxh = max(s.max_horizon for s in scheme.sign_restrictions.values())
    out = np.empty(len(ident.draw_index), dtype=bool)
    for i, d in enumerate(ident.draw_index):
        psi = ma_coefficients(draws.coefs[d], spec.lags, maxh, spec.include_constant) if maxh > 0 else None
        chk = _SignChecker(scheme, spec.variables, psi, float(np.sqrt(np.max(np.diag(draws.sigma[d])))))
        out[i] = chk.audit(ident.impact[i])
    return out
