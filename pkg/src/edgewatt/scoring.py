"""Device efficiency scoring over an app-level energy dataset.

Two complementary scores per device: a power headroom score (how far below
its TDP the device runs, averaged over every workload/delegate record) and
an inverse-energy score (summed inferences-per-joule, so cheaper inference
on more delegates scores higher).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

from .dataset import AppEnergyRecord


class ScoringError(ValueError):
    pass


@dataclass(frozen=True)
class DeviceProfile:
    device: str
    tdp_mw: float

    def __post_init__(self):
        if self.tdp_mw <= 0:
            raise ScoringError(f"tdp_mw must be > 0, got {self.tdp_mw}")


def power_efficiency(avg_power_mw: float, tdp_mw: float) -> float:
    """Headroom percentage: 100 at zero draw, 0 at TDP, negative above it."""
    if tdp_mw <= 0:
        raise ScoringError(f"tdp_mw must be > 0, got {tdp_mw}")
    if avg_power_mw <= 0:
        raise ScoringError(f"avg_power_mw must be > 0, got {avg_power_mw}")
    return (1.0 - avg_power_mw / tdp_mw) * 100.0


def pcs(records: list[AppEnergyRecord], profile: DeviceProfile) -> float:
    """Mean power headroom over every record; each (dnn, delegate) row
    counts once, so wider delegate support weighs in."""
    if not records:
        raise ScoringError("no records to score")
    vals = [power_efficiency(r.avg_power_mw, profile.tdp_mw) for r in records]
    return math.fsum(vals) / len(vals)


def iec(energy_mj: float) -> float:
    """Inferences per joule: 1000 / energy_mj."""
    if energy_mj <= 0:
        raise ScoringError(f"energy_mj must be > 0, got {energy_mj}")
    return 1000.0 / energy_mj


def iecs(records: list[AppEnergyRecord]) -> float:
    if not records:
        raise ScoringError("no records to score")
    return math.fsum(iec(r.energy_mj) for r in records)


@dataclass
class ScoreCard:
    device: str
    tdp_mw: float
    n_records: int
    pcs: float
    iecs: float
    warnings: list[str] = field(default_factory=list)


def benchmark_device(records: list[AppEnergyRecord],
                     profile: DeviceProfile) -> ScoreCard:
    """Score one device over its app records. Records for other devices are
    an error; draws above TDP are flagged but still counted, not clamped."""
    mine = [r for r in records if r.device == profile.device]
    if len(mine) != len(records):
        strays = sorted({r.device for r in records if r.device != profile.device})
        raise ScoringError(
            f"records for {strays} mixed into scorecard of {profile.device!r}")
    if not mine:
        raise ScoringError(f"no records for device {profile.device!r}")
    warnings = [
        f"{r.dnn_id}/{r.delegate}: avg power {r.avg_power_mw} mW exceeds "
        f"TDP {profile.tdp_mw} mW"
        for r in mine if r.avg_power_mw > profile.tdp_mw
    ]
    return ScoreCard(device=profile.device, tdp_mw=profile.tdp_mw,
                     n_records=len(mine), pcs=pcs(mine, profile),
                     iecs=iecs(mine), warnings=warnings)


PROFILE_HEADER = ("device", "tdp_mw")


def profiles_to_csv(profiles: list[DeviceProfile]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROFILE_HEADER)
    for p in profiles:
        w.writerow([p.device, repr(p.tdp_mw)])
    return buf.getvalue()


def load_profiles(text: str) -> list[DeviceProfile]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != list(PROFILE_HEADER):
        raise ScoringError(f"profiles must start with header {','.join(PROFILE_HEADER)}")
    out = []
    seen = set()
    for lineno, row in enumerate(reader, start=2):
        try:
            p = DeviceProfile(device=row["device"], tdp_mw=float(row["tdp_mw"]))
        except ScoringError:
            raise
        except (KeyError, ValueError, TypeError) as e:
            raise ScoringError(f"line {lineno}: {e}") from e
        if p.device in seen:
            raise ScoringError(f"line {lineno}: duplicate device {p.device!r}")
        seen.add(p.device)
        out.append(p)
    return out


SCORE_HEADER = ("device", "tdp_mw", "n_records", "pcs", "iecs")


def score_cards_to_csv(cards: list[ScoreCard]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCORE_HEADER)
    for c in cards:
        w.writerow([c.device, repr(c.tdp_mw), c.n_records, repr(c.pcs), repr(c.iecs)])
    return buf.getvalue()
