"""Feature quantisation and bit transmission over Fisher-Snedecor F fading.

Each patch's bits see one fading realisation per trial (block fading) and a
per-bit SNR scaled by the patch's share of the power budget. Bits flip
independently with the coherent antipodal error probability Q(sqrt(2*snr)).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .attnmap import PatchGrid, PatchWeights
from .errors import ConfigError, GridMismatch, NonFiniteValue, ShapeMismatch
from .powalloc import PatchPowerPlan


@dataclass(frozen=True)
class ChannelConfig:
    m_f: float = 5.0
    m_s: float = 4.0
    snr_db: float = 10.0
    p_total: float = 30.0
    bits_per_dim: int = 8
    dims_per_patch: int = 64
    seed: int = 0

    def __post_init__(self):
        if not self.m_f > 0:
            raise ConfigError(f"m_f={self.m_f} must be positive")
        if not self.m_s > 1:
            raise ConfigError(f"m_s={self.m_s} must exceed 1 for a unit-mean channel")
        if not self.p_total > 0:
            raise ConfigError(f"p_total={self.p_total} must be positive")
        if not 2 <= self.bits_per_dim <= 16:
            raise ConfigError(f"bits_per_dim={self.bits_per_dim} not in [2, 16]")
        if self.dims_per_patch < 1:
            raise ConfigError("dims_per_patch must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def mean_snr(self):
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def omega(self):
        # E[x] = omega and E[1/y] = m_s/(m_s-1) give E[g] = 1
        return (self.m_s - 1.0) / self.m_s


@dataclass(frozen=True)
class FeatureTensor:
    values: np.ndarray  # (patch_count, dims_per_patch)
    v_max: float
    grid: PatchGrid | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.size == 0:
            raise ShapeMismatch(f"feature tensor must be 2-D, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteValue("feature tensor holds NaN or inf")
        if not self.v_max > 0:
            raise NonFiniteValue(f"v_max={self.v_max} must be positive")
        if self.grid is not None and self.grid.patch_count != v.shape[0]:
            raise GridMismatch(f"{v.shape[0]} patches for a {self.grid.patch_count}-patch grid")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def patch_count(self):
        return self.values.shape[0]

    @property
    def dims_per_patch(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class QuantizedFeatures:
    codes: np.ndarray  # (patch_count, dims) unsigned codes
    v_max: float
    bits_per_dim: int

    def bits(self) -> np.ndarray:
        """Bitstream as (patch_count, dims*bits) uint8, MSB first per value."""
        shifts = np.arange(self.bits_per_dim - 1, -1, -1, dtype=np.uint32)
        b = (self.codes[..., None] >> shifts) & 1
        return b.reshape(self.codes.shape[0], -1).astype(np.uint8)

    def dequantize(self, codes=None) -> np.ndarray:
        codes = self.codes if codes is None else codes
        step = 2.0 * self.v_max / (1 << self.bits_per_dim)
        return -self.v_max + (codes + 0.5) * step


@dataclass(frozen=True)
class TransmissionReport:
    per_patch_bits: np.ndarray
    per_patch_bit_errors: np.ndarray
    per_patch_ber: np.ndarray
    per_patch_mse: np.ndarray
    overall_ber: float
    overall_mse: float
    trials: int
    trial_bit_errors: np.ndarray = field(repr=False)  # (trials, patch_count)
    bits_per_patch_trial: int = 0

    def ber_over(self, mask) -> float:
        """Bit-weighted BER over the patches selected by ``mask``."""
        mask = np.asarray(mask, dtype=bool)
        bits = self.per_patch_bits[mask].sum()
        if bits == 0:
            return float("nan")
        return float(self.per_patch_bit_errors[mask].sum() / bits)

    def trial_ber_over(self, mask) -> np.ndarray:
        """Per-trial BER over the masked patches, shape (trials,)."""
        mask = np.asarray(mask, dtype=bool)
        bits = mask.sum() * self.bits_per_patch_trial
        if bits == 0:
            return np.full(self.trials, np.nan)
        return self.trial_bit_errors[:, mask].sum(axis=1) / bits


def synthesize_features(patch_count, dims_per_patch, seed, stream=0, grid=None) -> FeatureTensor:
    """Seeded standard-normal features; v_max is the largest magnitude."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xFEA7, stream]))
    values = rng.standard_normal((patch_count, dims_per_patch))
    return FeatureTensor(values, float(np.abs(values).max()), grid)


def trial_stream(seed: int, tile: int, trial: int) -> np.random.Generator:
    """Counter-based stream for one (seed, tile, trial) cell.

    The Philox key comes from (seed, tile); the trial index occupies the top
    counter word, so trials are disjoint and can be evaluated in any order.
    """
    key = np.random.SeedSequence([seed, tile]).generate_state(2, np.uint64)
    counter = np.array([0, 0, 0, trial], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def fading_gains(cfg: ChannelConfig, rng: np.random.Generator, size) -> np.ndarray:
    """Unit-mean Fisher-Snedecor F power gains x / y.

    x ~ Gamma(m_f, omega/m_f) is the Nakagami-m multipath power, y ~ Gamma(m_s,
    1/m_s) the inverse-Nakagami shadowing power.
    """
    x = rng.gamma(cfg.m_f, cfg.omega / cfg.m_f, size)
    y = rng.gamma(cfg.m_s, 1.0 / cfg.m_s, size)
    return x / y


def sample_fading_gain(cfg: ChannelConfig, rng: np.random.Generator) -> float:
    return float(fading_gains(cfg, rng, None))


def q_function(x):
    """Gaussian tail probability P(Z > x)."""
    return 0.5 * erfc(np.asarray(x, dtype=np.float64) / np.sqrt(2.0))


def bit_error_probability(snr):
    """Coherent binary antipodal BER at per-bit SNR ``snr`` (linear)."""
    return q_function(np.sqrt(2.0 * np.asarray(snr, dtype=np.float64)))


def per_bit_snr(cfg: ChannelConfig, plan: PatchPowerPlan, gains) -> np.ndarray:
    return cfg.mean_snr * plan.gain_factors() * np.asarray(gains)


def quantize_features(t: FeatureTensor, bits_per_dim: int) -> QuantizedFeatures:
    """Uniform mid-rise quantiser over [-v_max, v_max]."""
    if not 2 <= bits_per_dim <= 16:
        raise ConfigError(f"bits_per_dim={bits_per_dim} not in [2, 16]")
    if not np.all(np.isfinite(t.values)):
        raise NonFiniteValue("cannot quantise non-finite values")
    levels = 1 << bits_per_dim
    step = 2.0 * t.v_max / levels
    codes = np.floor((t.values + t.v_max) / step)
    codes = np.clip(codes, 0, levels - 1).astype(np.uint32)
    return QuantizedFeatures(codes, t.v_max, bits_per_dim)


def transmit(t: FeatureTensor, plan: PatchPowerPlan, cfg: ChannelConfig, trials: int, tile: int = 0):
    """Send ``t`` ``trials`` times; return (report, reconstruction of the last trial).

    Random draws depend only on (cfg.seed, tile, trial), never on the plan or
    the SNR, so runs that differ only in power allocation are paired.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n, d = t.values.shape
    if len(plan.powers) != n or (plan.grid is not None and t.grid is not None and plan.grid != t.grid):
        raise GridMismatch(f"plan covers {len(plan.powers)} patches, tensor has {n}")
    if d != cfg.dims_per_patch:
        raise GridMismatch(f"tensor has {d} dims per patch, config says {cfg.dims_per_patch}")

    b = cfg.bits_per_dim
    q = quantize_features(t, b)
    nbits = d * b
    weights = (1 << np.arange(b - 1, -1, -1, dtype=np.uint32))
    factors = plan.gain_factors()

    errors = np.zeros((trials, n), dtype=np.int64)
    sq_err = np.zeros(n)
    recon = None
    for k in range(trials):
        rng = trial_stream(cfg.seed, tile, k)
        gains = fading_gains(cfg, rng, n)
        u = rng.random((n, nbits))
        p = bit_error_probability(cfg.mean_snr * factors * gains)
        flips = u < p[:, None]
        errors[k] = flips.sum(axis=1)
        mask = (flips.reshape(n, d, b) * weights).sum(axis=2).astype(np.uint32)
        recon = q.dequantize(q.codes ^ mask)
        sq_err += ((recon - t.values) ** 2).mean(axis=1)

    per_bits = np.full(n, nbits * trials, dtype=np.int64)
    per_err = errors.sum(axis=0)
    per_mse = sq_err / trials
    report = TransmissionReport(
        per_patch_bits=per_bits,
        per_patch_bit_errors=per_err,
        per_patch_ber=per_err / per_bits,
        per_patch_mse=per_mse,
        overall_ber=float(per_err.sum() / per_bits.sum()),
        overall_mse=float(per_mse.mean()),
        trials=trials,
        trial_bit_errors=errors,
        bits_per_patch_trial=nbits,
    )
    return report, FeatureTensor(recon, t.v_max, t.grid)


def weighted_mse(per_patch_mse, raw) -> float:
    """Importance-weighted MSE; with no positive weight it is the plain mean."""
    raw = np.asarray(raw, dtype=np.float64)
    per_patch_mse = np.asarray(per_patch_mse, dtype=np.float64)
    total = raw.sum()
    if total <= 0:
        return float(per_patch_mse.mean())
    return float((raw * per_patch_mse).sum() / total)


def distortion(original: FeatureTensor, reconstructed: FeatureTensor, weights: PatchWeights) -> dict:
    if original.values.shape != reconstructed.values.shape:
        raise ShapeMismatch(f"{original.values.shape} vs {reconstructed.values.shape}")
    if len(weights.raw) != original.patch_count:
        raise ShapeMismatch(f"{len(weights.raw)} weights for {original.patch_count} patches")
    mse = ((original.values - reconstructed.values) ** 2).mean(axis=1)
    return {"overall_mse": float(mse.mean()), "weighted_mse": weighted_mse(mse, weights.raw)}
