"""Monte Carlo experiment harness behind the command line."""
from __future__ import annotations

import csv
import io
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import adversary, analysis, protocol1, protocol2, protocol3, qcore
from .runtime import AuthKey, Qubit, Thresholds, rng_substream

PROTOCOLS = (1, 2, 3)
ATTACKS = ("none", "impersonation", "measure-resend", "forge", "ancilla-forge")
DEFAULT_SEED = 20240101


class ConfigError(ValueError):
    """Rejected experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: int = 1
    attack: str = "impersonation"
    n: int = 3
    trials: int = 10_000
    seed: int = DEFAULT_SEED
    qber_threshold: float = 0.0
    auth_threshold: float = 0.0
    coefficients: str | None = None
    forge_policy: str = "uniform"
    decoys_per_hop: int | None = None
    out_path: str | None = None

    def validate(self) -> "ExperimentConfig":
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}")
        if self.attack not in ATTACKS:
            raise ConfigError(f"attack must be one of {ATTACKS}")
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        for name in ("qber_threshold", "auth_threshold"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.attack == "ancilla-forge" and self.protocol != 3:
            raise ConfigError("ancilla-forge applies to protocol 3 only")
        if self.attack == "forge" and self.protocol == 3:
            raise ConfigError("forge applies to protocols 1 and 2")
        if self.forge_policy not in ("uniform",) + adversary.FOUR_STATES:
            raise ConfigError(f"forge policy must be 'uniform' or one of {adversary.FOUR_STATES}")
        if self.decoys_per_hop is not None and self.decoys_per_hop < 0:
            raise ConfigError("decoys_per_hop must be non-negative")
        if self.attack == "ancilla-forge":
            self.forge_coefficients()
        return self

    def forge_coefficients(self) -> adversary.ForgeCoefficients:
        s = 1 / math.sqrt(2)
        try:
            if self.coefficients is None:
                return adversary.ForgeCoefficients.complete((0, s, s, 0))
            return adversary.ForgeCoefficients.from_string(self.coefficients)
        except ValueError as exc:
            raise ConfigError(f"bad forge coefficients: {exc}") from None

    def key_bits(self) -> int:
        return 4 * self.n if self.protocol == 2 else 2 * self.n

    def decoys(self) -> int:
        if self.decoys_per_hop is not None:
            return self.decoys_per_hop
        # the forging scenario has Eve act on particle 2 alone
        return 0 if self.attack == "ancilla-forge" else self.n


@dataclass(frozen=True)
class ResultRow:
    protocol: int
    attack: str
    n: int
    trials: int
    detections: int
    detection_rate: float
    ci_low: float
    ci_high: float
    closed_form: float
    seed: int


CSV_FIELDS = [f.name for f in fields(ResultRow)]


def _make_taps(cfg: ExperimentConfig, rng: np.random.Generator):
    """Attack on the forward leg only; returns (tap, p3_taps)."""
    a = cfg.attack
    if a == "none":
        return None, protocol3.P3Taps()
    if a == "impersonation":
        tap = adversary.impersonate(cfg.protocol, cfg.n, rng)
        return tap, (tap.taps() if cfg.protocol == 3 else None)
    if a == "measure-resend":
        tap = adversary.measure_resend(rng)
        return tap, protocol3.P3Taps(a_to_c=tap)
    if a == "forge":
        return adversary.forge_p1(cfg.forge_policy, rng), None
    tap = adversary.ancilla_forge_p3(cfg.forge_coefficients(), rng)
    return tap, tap.taps()


def run_trial(cfg: ExperimentConfig, trial: int) -> bool:
    """One full protocol run; True when any verifier rejects."""
    rng = rng_substream(cfg.seed, trial)
    if cfg.attack == "ancilla-forge":
        key = AuthKey.from_string("10" * cfg.n)
    else:
        key = AuthKey.random(cfg.key_bits(), rng)
    thr = Thresholds(cfg.qber_threshold, cfg.auth_threshold)
    tap, p3taps = _make_taps(cfg, rng)
    if cfg.protocol == 1:
        reports = protocol1.p1_mutual(key, rng, tap_ab=tap, thresholds=thr)
    elif cfg.protocol == 2:
        reports = protocol2.p2_mutual(key, rng, tap_ab=tap, thresholds=thr)
    else:
        reports = (protocol3.p3_protocol(key, rng, taps=p3taps, decoys_per_hop=cfg.decoys(), thresholds=thr),)
    return not all(r.accepted for r in reports)


def _count(args) -> int:
    cfg, lo, hi = args
    return sum(run_trial(cfg, t) for t in range(lo, hi))


def worker_count() -> int:
    env = os.environ.get("QIA_SIM_THREADS")
    cpus = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cpus))
        except ValueError:
            raise ConfigError("QIA_SIM_THREADS must be an integer") from None
    return cpus


def count_detections(cfg: ExperimentConfig, workers: int | None = None) -> int:
    """Run all trials; the total is independent of the worker count."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or cfg.trials < 200:
        return _count((cfg, 0, cfg.trials))
    edges = np.linspace(0, cfg.trials, workers * 4 + 1).astype(int)
    chunks = [(cfg, int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(_count, chunks))


def closed_form(cfg: ExperimentConfig) -> float:
    """Headline value where one exists, exact enumeration otherwise."""
    if cfg.attack == "impersonation":
        return analysis.detection_probability(cfg.protocol, cfg.n)
    if cfg.attack == "ancilla-forge":
        return 1.0 - analysis.eve_success_p3(cfg.forge_coefficients()) ** cfg.n
    return exact_value(cfg)


def exact_value(cfg: ExperimentConfig) -> float:
    """Detection probability of the simulated strategy, by exact enumeration."""
    kw = {}
    if cfg.attack == "forge":
        kw["policy"] = cfg.forge_policy
    if cfg.attack == "ancilla-forge":
        kw["coefficients"] = cfg.forge_coefficients()
    if cfg.protocol == 3 and cfg.attack == "measure-resend":
        kw["decoys_per_hop"] = cfg.decoys()
    return analysis.exact_detection_probability(cfg.protocol, cfg.attack, cfg.n, **kw)


def run(cfg: ExperimentConfig, workers: int | None = None) -> ResultRow:
    cfg.validate()
    k = count_detections(cfg, workers)
    lo, hi = analysis.wilson_interval(k, cfg.trials)
    return ResultRow(cfg.protocol, cfg.attack, cfg.n, cfg.trials, k, k / cfg.trials, lo, hi,
                     closed_form(cfg), cfg.seed)


def _fmt(v) -> str:
    return format(v, ".10g") if isinstance(v, float) else str(v)


def format_rows(rows, header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(CSV_FIELDS)
    for r in rows:
        w.writerow([_fmt(v) for v in asdict(r).values()])
    return buf.getvalue()


def _stamp() -> str:
    return f"# generated {datetime.now(timezone.utc).isoformat(timespec='seconds')}\n"


def write_rows(path, rows, *, append: bool = False, deterministic: bool = False) -> None:
    """Write (or append) result rows; a new file starts with the header."""
    path = Path(path)
    fresh = not (append and path.exists() and path.stat().st_size > 0)
    text = ("" if deterministic or not fresh else _stamp()) + format_rows(rows, header=fresh)
    with open(path, "w" if fresh else "a", newline="", encoding="utf-8") as fh:
        fh.write(text)


# Detection curve ---------------------------------------------------------------

def curve(cfg: ExperimentConfig, n_min: int, n_max: int, workers: int | None = None) -> list[ResultRow]:
    if n_min < 1 or n_min > n_max:
        raise ConfigError("need 1 <= n_min <= n_max")
    return [run(replace(cfg, n=n), workers) for n in range(n_min, n_max + 1)]


def render_svg(rows: list[ResultRow], exact: list[float] | None = None, title: str = "") -> str:
    """Line chart of detection probability against n, without plotting libraries."""
    W, H, L, R, T, B = 640, 420, 70, 20, 40, 60
    ns = [r.n for r in rows]
    x0, x1 = min(ns), max(ns)
    span = max(x1 - x0, 1)
    px = lambda n: L + (n - x0) / span * (W - L - R)  # noqa: E731
    py = lambda p: T + (1 - p) * (H - T - B)  # noqa: E731
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{title}</text>',
        f'<line x1="{L}" y1="{py(0):.1f}" x2="{W - R}" y2="{py(0):.1f}" stroke="black"/>',
        f'<line x1="{L}" y1="{T}" x2="{L}" y2="{py(0):.1f}" stroke="black"/>',
    ]
    for i in range(6):
        p = i / 5
        out.append(f'<line x1="{L - 5}" y1="{py(p):.1f}" x2="{L}" y2="{py(p):.1f}" stroke="black"/>')
        out.append(f'<text x="{L - 8}" y="{py(p) + 4:.1f}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="11">{p:.1f}</text>')
    for n in ns:
        out.append(f'<text x="{px(n):.1f}" y="{py(0) + 18:.1f}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="11">{n}</text>')
    out.append(f'<text x="{W / 2:.1f}" y="{H - 15}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="13">n</text>')
    out.append(f'<text x="18" y="{H / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="13" '
               f'transform="rotate(-90 18 {H / 2:.1f})">P(n)</text>')

    def path(vals, style):
        pts = " ".join(f"{'M' if i == 0 else 'L'}{px(n):.1f},{py(v):.1f}" for i, (n, v) in enumerate(zip(ns, vals)))
        return f'<path d="{pts}" fill="none" {style}/>'

    out.append(path([r.closed_form for r in rows], 'stroke="#1f77b4" stroke-width="2"'))
    if exact is not None:
        out.append(path(exact, 'stroke="#d62728" stroke-width="1.5" stroke-dasharray="6,4"'))
    for r in rows:
        x = px(r.n)
        out.append(f'<line x1="{x:.1f}" y1="{py(r.ci_low):.1f}" x2="{x:.1f}" y2="{py(r.ci_high):.1f}" stroke="black"/>')
        out.append(f'<circle cx="{x:.1f}" cy="{py(r.detection_rate):.1f}" r="3.5" fill="black"/>')
    legend = [("#1f77b4", "closed form", ""), ("#d62728", "exact for simulated attack", ' stroke-dasharray="6,4"')]
    if exact is None:
        legend = legend[:1]
    for i, (color, text, dash) in enumerate(legend):
        y = py(0) - 60 + 18 * i
        out.append(f'<line x1="{W - 230}" y1="{y:.1f}" x2="{W - 200}" y2="{y:.1f}" stroke="{color}" '
                   f'stroke-width="2"{dash}/>')
        out.append(f'<text x="{W - 195}" y="{y + 4:.1f}" font-family="sans-serif" font-size="11">{text}</text>')
    y = py(0) - 60 + 18 * len(legend)
    out.append(f'<circle cx="{W - 215}" cy="{y:.1f}" r="3.5" fill="black"/>')
    out.append(f'<text x="{W - 195}" y="{y + 4:.1f}" font-family="sans-serif" font-size="11">'
               f'Monte Carlo (Wilson 95%)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# Information tables ----------------------------------------------------------------

@dataclass(frozen=True)
class InfoRow:
    protocol: int
    quantity: str
    closed_form: float
    monte_carlo: float
    tolerance: float
    within: bool


def _plugin_info(pairs: Counter) -> tuple[float, float, float]:
    """Plug-in (H(Y|X), H(Y), I(X:Y)) from counted (x, y) samples."""
    total = sum(pairs.values())
    px, py = Counter(), Counter()
    for (x, y), c in pairs.items():
        px[x] += c
        py[y] += c
    h = lambda cs: analysis.shannon([c / total for c in cs])  # noqa: E731
    hx, hy, hxy = h(px.values()), h(py.values()), h(pairs.values())
    return hxy - hx, hy, hy - (hxy - hx)


def _sample_p1(samples: int, rng) -> tuple[Counter, Counter, list]:
    bob, eve, sources = Counter(), Counter(), []
    n = 16
    while sum(bob.values()) < samples:
        key = AuthKey.random(2 * n, rng)
        msg, record = protocol1.p1_encode(key, rng)
        tap = adversary.measure_resend(rng)
        tap(msg)
        res = protocol1.p1_decode(msg, key, record, rng, Thresholds(1.0, 1.0))
        _, eve_auth = protocol1.split_positions(key, tap.records)
        for p, out, (eb, eo) in zip(protocol1.parities(key), res.outcomes, eve_auth):
            a = protocol1.AUTH_STATE[p]
            bob[(a, out)] += 1
            eve[(a, eo)] += 1
            sources.append(a)
    return bob, eve, sources


def _sample_p2(samples: int, rng) -> tuple[Counter, Counter, list]:
    bob, eve, sources = Counter(), Counter(), []
    n = 16
    while sum(bob.values()) < samples:
        half = AuthKey.random(2 * n, rng)
        msg = protocol2.p2_encode(half)
        tap = adversary.measure_resend(rng)
        tap(msg)
        res = protocol2.p2_decode(msg, half, rng, Thresholds(1.0, 1.0))
        for (k1, k2), bit, (eb, eo) in zip(half.pairs(), res.recovered, tap.records):
            a = protocol2.particle_label(k1, k2)
            bob[(a, qcore.BASIS_LABELS[protocol2.BASIS[k1 ^ k2]][bit])] += 1
            eve[(a, eo)] += 1
            sources.append(a)
    return bob, eve, sources


_S_DAG = np.array([[1, 0], [0, -1j]])


def _bloch_estimate(qubits, rng) -> np.ndarray:
    """Single-shot Pauli tomography, each qubit measured on one random axis."""
    sums, counts = np.zeros(3), np.zeros(3)
    for q in qubits:
        axis = int(rng.integers(3))
        if axis == 1:
            q.apply(_S_DAG)
        out = q.measure("Z" if axis == 2 else "X", rng)
        sums[axis] += 1 if out in ("0", "+") else -1
        counts[axis] += 1
    return sums / np.maximum(counts, 1)


def _rho(bloch) -> qcore.DensityMatrix:
    r = np.asarray(bloch, dtype=float)
    nrm = np.linalg.norm(r)
    if nrm > 1:
        r = r / nrm
    x, y, z = r
    m = 0.5 * np.array([[1 + z, x - 1j * y], [x + 1j * y, 1 - z]])
    return qcore.DensityMatrix(m)


def _mc_holevo(states: list[tuple[float, str]], samples: int, rng) -> float:
    """Holevo quantity with the average state estimated by tomography; members are pure."""
    labels = [lab for _, lab in states]
    weights = np.array([w for w, _ in states])
    picks = rng.choice(len(labels), size=samples, p=weights)
    qs = [Qubit.fresh(qcore.prepare_basis_state(labels[i])) for i in picks]
    return qcore.von_neumann_entropy(_rho(_bloch_estimate(qs, rng)))


def _mc_chi_p3(particle: int, samples: int, rng) -> float:
    per = samples // 4
    members = []
    for code in qcore.BELL_CODES:
        qs = []
        for _ in range(per):
            reg = protocol3.Register(qcore.tensor(qcore.prepare_bell(code), qcore.prepare_bell(code)),
                                     ["1", "2", "3", "4"])
            qs.append(Qubit(reg, str(particle)))
        members.append(_bloch_estimate(qs, rng))
    avg = _rho(np.mean(members, axis=0))
    return qcore.von_neumann_entropy(avg) - sum(0.25 * qcore.von_neumann_entropy(_rho(b)) for b in members)


def info_tables(samples: int = 100_000, seed: int = DEFAULT_SEED) -> list[InfoRow]:
    vals = analysis.info_values()
    rows = []
    tol = 0.02
    for proto, sampler in ((1, _sample_p1), (2, _sample_p2)):
        rng = rng_substream(seed, proto)
        bob, eve, _ = sampler(samples, rng)
        hba, hb, iab = _plugin_info(bob)
        hea, he, iae = _plugin_info(eve)
        ens = ([(0.5, "0"), (0.5, "-")] if proto == 1 else [(0.25, s) for s in analysis.STATES])
        chi = _mc_holevo(ens, samples, rng)
        for name, mc in (("H(B|A)", hba), ("H(B)", hb), ("I(A:B)", iab), ("H(E|A)", hea), ("H(E)", he),
                         ("I(A:E)", iae), ("Holevo", chi)):
            cf = vals[(proto, name)]
            rows.append(InfoRow(proto, name, cf, mc, tol, abs(cf - mc) <= tol))
    rng = rng_substream(seed, 3)
    for particle in (2, 4):
        name = f"chi(rho{particle})"
        cf = vals[(3, name)]
        mc = _mc_chi_p3(particle, samples, rng)
        rows.append(InfoRow(3, name, cf, mc, tol, abs(cf - mc) <= tol))
    return rows


def format_info(rows: list[InfoRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f.name for f in fields(InfoRow)])
    for r in rows:
        w.writerow([_fmt(v) if not isinstance(v, bool) else str(v).lower() for v in asdict(r).values()])
    return buf.getvalue()


# Structural verification ---------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def verify_checks(bell_vectors=None) -> list[Check]:
    checks = []
    ok = protocol3.verify_eq5(bell_vectors=bell_vectors)
    checks.append(Check("rearranged five-particle state", ok, "32 coefficients within 1e-12"))

    honest = protocol3.outcome_distribution("10", "10", "-", "2")
    ok = set(honest) == protocol3.TABLE_HONEST and all(abs(p - 0.125) < 1e-12 for p in honest.values())
    checks.append(Check("honest outcome table", ok, f"{len(honest)} rows, each 1/8"))

    eve = protocol3.outcome_distribution("00", "10", "-", "2", alice_pauli="00")
    passing = sum(p for (a, b, r5), p in eve.items() if protocol3.xor_rule(r5, qcore.xor_codes(a, b)))
    ok = set(eve) == protocol3.TABLE_EVE_PHI_PLUS and passing < 1e-12
    checks.append(Check("phi+ substitution table", ok, f"{len(eve)} rows, pass mass {passing:.3g}"))

    sweep = protocol3.key_independence_sweep()
    worst = min(p for *_, p in sweep)
    checks.append(Check("acceptance rule for every key and control choice", abs(worst - 1) < 1e-9,
                        f"{len(sweep)} settings, min pass probability {worst:.15f}"))
    return checks


def format_checks(checks: list[Check]) -> str:
    return "".join(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}\n" for c in checks)
