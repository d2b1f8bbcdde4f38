"""Exogenous data: the six driver sources, their validation, one-hot
encodings, and the embedding front end that turns them into dense feature
channels.

Channel layout of the embedded tensor (all sources enabled), fixed and
stable across runs:

    maintenance   9 categories x 4 embedding dims = 36   (varies over time)
    structure     4                                      (constant over time)
    rail joint    4 joint channels x 4 dims        = 16  (constant over time)
    ballast age   1   passthrough, standardized
    tonnage       1   passthrough, standardized
    rainfall      4   passthrough, standardized
                                            total    62

Binary values are fed to the embedding layers as (1,0)/(0,1) one-hot pairs
(never the zero vector, which would make the layer untrainable), structure
as a 5-way one-hot. One dense layer exists per sparse data format and is
shared across categories within the format. Real-valued sources skip the
embedding and are concatenated directly after standardization with
training-split statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import EncodingError, ValidationError

MAINTENANCE_CATEGORIES = (
    "uneven_fixing",
    "tamping_mtt",
    "manual_tamping",
    "ballast_replacement",
    "right_rail_replacement",
    "left_rail_replacement",
    "sleeper_maintenance",
    "mud_pumping_remediation",
    "others",
)
STRUCTURE_CATEGORIES = ("bridge", "tunnel", "overpass", "embankment", "excavation")
JOINT_CHANNELS = ("insulated", "welded", "expansion_left", "expansion_right")
RAINFALL_CHANNELS = ("accumulated", "max_10min", "max_hourly", "max_daily")
SOURCES = ("maintenance", "structure", "rail_joint", "ballast_age", "tonnage",
           "rainfall")

EMBED_DIM = 4  # output size of every embedding layer; fixed, not configurable


def encode_binary(b) -> np.ndarray:
    """0 -> (0,1), 1 -> (1,0)."""
    if b not in (0, 1):
        raise EncodingError(f"binary value must be 0 or 1, got {b!r}")
    return np.array([1.0, 0.0]) if b == 1 else np.array([0.0, 1.0])


def encode_structure(category) -> np.ndarray:
    """Category index 0..4 -> 5-way one-hot."""
    n = len(STRUCTURE_CATEGORIES)
    if not isinstance(category, (int, np.integer)) or not 0 <= category < n:
        raise EncodingError(f"structure category must be in 0..{n - 1}, got {category!r}")
    out = np.zeros(n)
    out[category] = 1.0
    return out


@dataclass
class ExogenousBundle:
    """The six exogenous sources on a common (inspections, positions) grid.

    maintenance: (T, 9, L) binary; under_structure: (L,) codes 0..4;
    rail_joint: (4, L) binary; ballast_age, tonnage: (T, L) non-negative;
    rainfall: (T, 4, L) non-negative.
    """

    maintenance: np.ndarray
    under_structure: np.ndarray
    rail_joint: np.ndarray
    ballast_age: np.ndarray
    tonnage: np.ndarray
    rainfall: np.ndarray

    @property
    def inspections(self) -> int:
        return self.maintenance.shape[0]

    @property
    def positions(self) -> int:
        return self.under_structure.shape[0]

    def slice_time(self, start: int, stop: int) -> "ExogenousBundle":
        return ExogenousBundle(
            maintenance=self.maintenance[start:stop],
            under_structure=self.under_structure,
            rail_joint=self.rail_joint,
            ballast_age=self.ballast_age[start:stop],
            tonnage=self.tonnage[start:stop],
            rainfall=self.rainfall[start:stop],
        )

    def validate(self, max_lines: int = 20) -> list[str]:
        """Invariant violations as "<source> <t> <l> <message>" lines."""
        lines: list[str] = []

        def report(source, t, l, message):
            if len(lines) < max_lines:
                lines.append(f"{source} {t} {l} {message}")

        T, ncat, L = self.maintenance.shape
        if ncat != len(MAINTENANCE_CATEGORIES):
            report("maintenance", "-", "-",
                   f"expected {len(MAINTENANCE_CATEGORIES)} categories, got {ncat}")
        bad = np.argwhere((self.maintenance != 0) & (self.maintenance != 1))
        for t, c, l in bad[:max_lines]:
            report("maintenance", t, l, f"value {self.maintenance[t, c, l]!r} not binary")
        bad = np.argwhere((self.under_structure < 0)
                          | (self.under_structure >= len(STRUCTURE_CATEGORIES)))
        for (l,) in bad[:max_lines]:
            report("structure", "-", l, f"code {self.under_structure[l]!r} out of range")
        bad = np.argwhere((self.rail_joint != 0) & (self.rail_joint != 1))
        for c, l in bad[:max_lines]:
            report("rail_joint", "-", l, f"value {self.rail_joint[c, l]!r} not binary")
        for name in ("ballast_age", "tonnage"):
            arr = getattr(self, name)
            bad = np.argwhere(arr < 0)
            for t, l in bad[:max_lines]:
                report(name, t, l, f"negative value {arr[t, l]!r}")
        bad = np.argwhere(self.rainfall < 0)
        for t, c, l in bad[:max_lines]:
            report("rainfall", t, l, f"negative value {self.rainfall[t, c, l]!r}")
        bridge = self.under_structure == STRUCTURE_CATEGORIES.index("bridge")
        bad = np.argwhere(self.ballast_age[:, bridge] != 0)
        bridge_positions = np.nonzero(bridge)[0]
        for t, j in bad[:max_lines]:
            report("ballast_age", t, bridge_positions[j],
                   "nonzero ballast age on a bridge")
        return lines

    def check(self):
        lines = self.validate()
        if lines:
            raise ValidationError("exogenous bundle invalid:\n" + "\n".join(lines))


@dataclass
class ExoFlags:
    """Per-source on/off switches selecting which channels enter the model."""
    maintenance: bool = True
    structure: bool = True
    rail_joint: bool = True
    ballast_age: bool = True
    tonnage: bool = True
    rainfall: bool = True

    def channel_count(self) -> int:
        return (36 * self.maintenance + 4 * self.structure + 16 * self.rail_joint
                + 1 * self.ballast_age + 1 * self.tonnage + 4 * self.rainfall)

    def as_dict(self) -> dict:
        return {name: bool(getattr(self, name)) for name in SOURCES}

    @classmethod
    def none(cls) -> "ExoFlags":
        return cls(False, False, False, False, False, False)

    @classmethod
    def all_except(cls, source: str) -> "ExoFlags":
        flags = cls()
        if source not in SOURCES:
            raise EncodingError(f"unknown exogenous source {source!r}")
        setattr(flags, source, False)
        return flags


@dataclass
class ExoNormStats:
    """Standardization constants for the passthrough channels, computed on
    the training split and frozen into checkpoints."""
    ballast_mean: float = 0.0
    ballast_std: float = 1.0
    tonnage_mean: float = 0.0
    tonnage_std: float = 1.0
    rainfall_mean: np.ndarray = field(default_factory=lambda: np.zeros(4))
    rainfall_std: np.ndarray = field(default_factory=lambda: np.ones(4))

    @classmethod
    def from_training(cls, bundle: ExogenousBundle, t_stop: int) -> "ExoNormStats":
        """Statistics over inspections [0, t_stop) of the bundle."""
        floor = 1e-9
        return cls(
            ballast_mean=float(bundle.ballast_age[:t_stop].mean()),
            ballast_std=max(float(bundle.ballast_age[:t_stop].std()), floor),
            tonnage_mean=float(bundle.tonnage[:t_stop].mean()),
            tonnage_std=max(float(bundle.tonnage[:t_stop].std()), floor),
            rainfall_mean=bundle.rainfall[:t_stop].mean(axis=(0, 2)),
            rainfall_std=np.maximum(bundle.rainfall[:t_stop].std(axis=(0, 2)), floor),
        )


@dataclass
class EmbeddingParams:
    """One dense (in -> 4) layer per sparse data format."""
    maintenance_w: Tensor  # (4, 2)
    maintenance_b: Tensor  # (4,)
    structure_w: Tensor    # (4, 5)
    structure_b: Tensor    # (4,)
    joint_w: Tensor        # (4, 2)
    joint_b: Tensor        # (4,)

    @classmethod
    def init(cls, rng, prefix: str = "embed"):
        def mk(shape, fan_in, name):
            bound = 1.0 / np.sqrt(fan_in)
            return ad.parameter(rng.uniform(-bound, bound, size=shape),
                                f"{prefix}.{name}")

        return cls(
            maintenance_w=mk((EMBED_DIM, 2), 2, "maintenance_w"),
            maintenance_b=mk((EMBED_DIM,), 2, "maintenance_b"),
            structure_w=mk((EMBED_DIM, 5), 5, "structure_w"),
            structure_b=mk((EMBED_DIM,), 5, "structure_b"),
            joint_w=mk((EMBED_DIM, 2), 2, "joint_w"),
            joint_b=mk((EMBED_DIM,), 2, "joint_b"),
        )

    def parameters(self):
        for name in ("maintenance_w", "maintenance_b", "structure_w",
                     "structure_b", "joint_w", "joint_b"):
            t = getattr(self, name)
            yield t.name, t


def _binary_onehot(flat: np.ndarray) -> np.ndarray:
    """Rows (value, 1-value) for a flat binary array; never the zero vector."""
    return np.stack([flat, 1.0 - flat], axis=0)


def _embed_static_blocks(bundle, params, flags, batch: int):
    """Time-constant channel blocks, replicated over the batch axis."""
    blocks = {}
    if flags.structure:
        onehot = np.zeros((len(STRUCTURE_CATEGORIES), bundle.positions))
        onehot[bundle.under_structure, np.arange(bundle.positions)] = 1.0
        emb = ad.channel_linear(ad.constant(onehot), params.structure_w,
                                params.structure_b)  # (4, L)
        blocks["structure"] = ad.broadcast_leading(emb, (batch,))
    if flags.rail_joint:
        njoint = len(JOINT_CHANNELS)
        onehot = _binary_onehot(bundle.rail_joint.reshape(-1).astype(np.float64))
        emb = ad.channel_linear(ad.constant(onehot), params.joint_w,
                                params.joint_b)  # (4, njoint*L)
        emb = ad.reshape(emb, (EMBED_DIM, njoint, bundle.positions))
        emb = ad.moveaxis(emb, 0, 1)  # (njoint, 4, L), joint-major
        emb = ad.reshape(emb, (njoint * EMBED_DIM, bundle.positions))
        blocks["rail_joint"] = ad.broadcast_leading(emb, (batch,))
    return blocks


def embed_window_steps(bundle: ExogenousBundle, params: EmbeddingParams,
                       windows: np.ndarray, flags: ExoFlags | None = None,
                       norm: ExoNormStats | None = None) -> list[Tensor]:
    """Embedded feature tensors for a batch of input windows, step by step.

    windows is an integer array (batch, tau) of inspection indices into the
    bundle. Returns tau tensors of shape (batch, channels, positions) in the
    documented channel order, restricted to the enabled sources.
    """
    flags = flags or ExoFlags()
    norm = norm or ExoNormStats()
    windows = np.asarray(windows)
    if windows.ndim != 2:
        raise ValidationError(f"windows must be (batch, tau), got {windows.shape}")
    if windows.min() < 0 or windows.max() >= bundle.inspections:
        raise ValidationError(
            f"window indices [{windows.min()}, {windows.max()}] outside "
            f"bundle range 0..{bundle.inspections - 1}")
    batch, tau = windows.shape
    L = bundle.positions
    ncat = len(MAINTENANCE_CATEGORIES)

    static = _embed_static_blocks(bundle, params, flags, batch)
    steps = []
    for t in range(tau):
        idx = windows[:, t]
        blocks = []
        if flags.maintenance:
            m = bundle.maintenance[idx].astype(np.float64)  # (batch, 9, L)
            onehot = _binary_onehot(m.reshape(-1))
            emb = ad.channel_linear(ad.constant(onehot), params.maintenance_w,
                                    params.maintenance_b)  # (4, batch*9*L)
            emb = ad.reshape(emb, (EMBED_DIM, batch, ncat, L))
            emb = ad.moveaxis(emb, 0, 2)  # (batch, ncat, 4, L), category-major
            blocks.append(ad.reshape(emb, (batch, ncat * EMBED_DIM, L)))
        if flags.structure:
            blocks.append(static["structure"])
        if flags.rail_joint:
            blocks.append(static["rail_joint"])
        if flags.ballast_age:
            v = (bundle.ballast_age[idx] - norm.ballast_mean) / norm.ballast_std
            blocks.append(ad.constant(v[:, None, :]))
        if flags.tonnage:
            v = (bundle.tonnage[idx] - norm.tonnage_mean) / norm.tonnage_std
            blocks.append(ad.constant(v[:, None, :]))
        if flags.rainfall:
            v = ((bundle.rainfall[idx] - norm.rainfall_mean[None, :, None])
                 / norm.rainfall_std[None, :, None])
            blocks.append(ad.constant(v))
        if not blocks:
            blocks.append(ad.constant(np.zeros((batch, 0, L))))
        steps.append(ad.concat(blocks, axis=1) if len(blocks) > 1 else blocks[0])
    return steps


def embed_bundle(bundle: ExogenousBundle, params: EmbeddingParams,
                 window, flags: ExoFlags | None = None,
                 norm: ExoNormStats | None = None) -> Tensor:
    """Embedded tensor (tau, channels, positions) for one input window.

    The bundle is validated first; violations raise with the offending
    source/time/position lines.
    """
    bundle.check()
    window = np.asarray(window).reshape(1, -1)
    steps = embed_window_steps(bundle, params, window, flags, norm)
    return ad.concat(steps, axis=0)
