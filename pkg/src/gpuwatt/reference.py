"""Reference operating data for six learned image-compression networks.

These are measured characteristics of the shipped network fixtures on a
Quadro RTX 4000 class setup: per-network quality-level partitions, complexity
in kMAC per pixel (whole network and up to the second downsampling stage),
and the fitted pixel-energy line per (network, quality_class). They anchor
the regression tests and let the full analysis pipeline run at desk scale by
regenerating statistically faithful synthetic measurement campaigns.
"""
from __future__ import annotations

from typing import Iterable

import numpy as np

from .network import pad_dimensions
from .trace import EnergyRecord

NETWORKS = ("bfac", "bhyp", "mmean", "mcont", "canch", "cattn")
QUALITY_CLASSES = ("low", "high")

#: quality levels belonging to each (network, variant)
QUALITY_LEVELS: dict[str, dict[str, tuple[int, ...]]] = {
    "bfac": {"low": (1, 2, 3, 4, 5), "high": (6, 7, 8)},
    "bhyp": {"low": (1, 2, 3, 4, 5), "high": (6, 7, 8)},
    "mmean": {"low": (1, 2, 3, 4), "high": (5, 6, 7, 8)},
    "mcont": {"low": (1, 2, 3, 4), "high": (5, 6, 7, 8)},
    "canch": {"low": (1, 2, 3), "high": (4, 5, 6)},
    "cattn": {"low": (1, 2, 3), "high": (4, 5, 6)},
}

#: image padding multiple required by each network
PAD_MULTIPLE: dict[str, int] = {
    "bfac": 16,
    "bhyp": 128,
    "mmean": 128,
    "mcont": 128,
    "canch": 128,
    "cattn": 128,
}

#: whole-network complexity in kMAC per pixel
KMAC_TOTAL: dict[tuple[str, str], float] = {
    ("bfac", "low"): 73.6,
    ("bfac", "high"): 163.2,
    ("bhyp", "low"): 76.3,
    ("bhyp", "high"): 169.7,
    ("mmean", "low"): 80.3,
    ("mmean", "high"): 181.4,
    ("mcont", "low"): 166.2,
    ("mcont", "high"): 201.8,
    ("canch", "low"): 373.4,
    ("canch", "high"): 834.8,
    ("cattn", "low"): 415.9,
    ("cattn", "high"): 930.3,
}

#: complexity up to and including the second downsampling stage
KMAC_SECOND_STAGE: dict[tuple[str, str], float] = {
    ("bfac", "low"): 56.0,
    ("bfac", "high"): 122.4,
    ("bhyp", "low"): 56.0,
    ("bhyp", "high"): 122.4,
    ("mmean", "low"): 56.0,
    ("mmean", "high"): 122.4,
    ("mcont", "low"): 122.4,
    ("mcont", "high"): 122.4,
    ("canch", "low"): 345.2,
    ("canch", "high"): 771.2,
    ("cattn", "low"): 385.1,
    ("cattn", "high"): 861.1,
}

#: fitted pixel-energy line per group: (alpha in J/pixel, beta in J)
ENERGY_MODEL: dict[tuple[str, str], tuple[float, float]] = {
    ("bfac", "low"): (1.05e-5, 1.95),
    ("bfac", "high"): (1.50e-5, 3.68),
    ("bhyp", "low"): (1.15e-5, 1.61),
    ("bhyp", "high"): (1.73e-5, 2.93),
    ("mmean", "low"): (1.17e-5, 1.58),
    ("mmean", "high"): (1.76e-5, 3.17),
    ("mcont", "low"): (1.75e-5, 3.01),
    ("mcont", "high"): (1.82e-5, 3.52),
    ("canch", "low"): (1.99e-5, 0.37),
    ("canch", "high"): (4.20e-5, 2.32),
    ("cattn", "low"): (2.34e-5, 0.42),
    ("cattn", "high"): (4.97e-5, 2.12),
}

#: 60-image test-set resolutions (width, height); one image sits below the
#: 1120x760 offset-share threshold, the rest are at least ~1.2 Mpx
RESOLUTIONS: tuple[tuple[int, int], ...] = (
    (751, 500), (1382, 1243), (1389, 1251), (1394, 1252), (1395, 877),
    (1400, 868), (1416, 1042), (1418, 1178), (1421, 1308), (1427, 989),
    (1440, 1164), (1480, 827), (1511, 1330), (1513, 1221), (1521, 876),
    (1587, 1249), (1607, 1270), (1623, 873), (1626, 936), (1657, 1089),
    (1659, 896), (1665, 1254), (1678, 1106), (1683, 1266), (1696, 1066),
    (1721, 1191), (1750, 1135), (1761, 1366), (1762, 1171), (1762, 1305),
    (1764, 825), (1771, 878), (1781, 986), (1781, 1158), (1791, 914),
    (1796, 961), (1797, 1277), (1799, 1321), (1834, 1085), (1838, 936),
    (1849, 1145), (1853, 956), (1874, 1192), (1893, 1206), (1894, 1003),
    (1923, 988), (1935, 1024), (1936, 910), (1937, 1194), (1956, 827),
    (1972, 1030), (1986, 842), (1998, 801), (2004, 813), (2004, 1040),
    (2030, 1002), (2031, 893), (2035, 1175), (2041, 949), (2048, 1366),
)

#: padded pixel count of the offset-share threshold image (1120 x 760)
OFFSET_SHARE_MIN_PIXELS = 1120 * 760


def quality_class_of(network: str, level: int) -> str:
    """Map a quality level to its {low, high} class; unknown networks -> 'all'."""
    levels = QUALITY_LEVELS.get(network)
    if levels is None:
        return "all"
    for qc, members in levels.items():
        if level in members:
            return qc
    raise ValueError(f"quality level {level} is outside {network}'s documented range")


def group_keys() -> list[tuple[str, str]]:
    """All (network, quality_class) groups in canonical order."""
    return [(n, qc) for n in NETWORKS for qc in QUALITY_CLASSES]


def make_reference_records(
    network: str,
    quality_class: str,
    rng_seed: int,
    noise: float = 0.06,
    pixels_mode: str = "padded",
    resolutions: Iterable[tuple[int, int]] = RESOLUTIONS,
) -> list[EnergyRecord]:
    """Regenerate one group's measurement campaign from its reference line.

    Each test-set image contributes one record whose energy is the model
    prediction at the image's (padded) pixel count times a relative Gaussian
    perturbation of standard deviation ``noise``. The seed fully determines
    the output.
    """
    if (network, quality_class) not in ENERGY_MODEL:
        raise ValueError(f"unknown reference group {network}/{quality_class}")
    if pixels_mode not in ("padded", "original"):
        raise ValueError(f"pixels_mode must be 'padded' or 'original', got {pixels_mode!r}")
    alpha, beta = ENERGY_MODEL[(network, quality_class)]
    levels = QUALITY_LEVELS[network][quality_class]
    rng = np.random.default_rng(rng_seed)
    records = []
    for i, (w, h) in enumerate(resolutions):
        if pixels_mode == "padded":
            _, _, pixels = pad_dimensions(w, h, PAD_MULTIPLE[network])
        else:
            pixels = w * h
        energy = (alpha * pixels + beta) * (1.0 + noise * rng.standard_normal())
        records.append(
            EnergyRecord(
                network_id=network,
                quality_level=levels[i % len(levels)],
                image_id=f"img{i:02d}_{w}x{h}",
                pixels=pixels,
                mean_energy_j=energy,
                k_iterations=5,
                m_repetitions=5,
            )
        )
    return records


def make_reference_campaign(
    rng_seed: int,
    noise: float = 0.06,
    pixels_mode: str = "padded",
) -> list[EnergyRecord]:
    """Regenerated records for every (network, quality_class) group.

    Group seeds are derived from ``rng_seed`` and the canonical group order,
    so the whole campaign is reproducible row for row.
    """
    records: list[EnergyRecord] = []
    for idx, (network, qc) in enumerate(group_keys()):
        records.extend(
            make_reference_records(network, qc, rng_seed + 1000 * idx, noise, pixels_mode)
        )
    return records
