"""Radiometric calibration of a spectrally scanned Bayer-sensor camera.

The sensor follows a linear model in the exposure time t: the dark signal
is offset + dark_current * t, and the dark-corrected bright signal of
pixel (i, j) under spectral filter k factorizes into a spatial vignetting
term and a per-(filter, Bayer-type) responsivity,

    mu[i, j, k, l] - dark(i, j, t_l)  =  v[i, j] * r[k, bayer(i, j)] * t_l.

The fit minimizes the masked, exposure-weighted squared residual of this
model.  Because the model is bilinear, alternating exact least-squares
updates of v and r decrease the objective monotonically per half sweep; a
first-order optimizer is not needed.  Exposure weights are 1 / t_l,
normalized to sum to one, so log-uniformly spaced exposure ladders
contribute evenly.  The scale ambiguity (c * v, r / c) is fixed by
rescaling so that mean(v) = 1 over the recoverable pixels.

Saturation handling: a measurement is excluded when its value exceeds the
threshold (0.985, the top four codes of a 10-bit sensor), when any of its
eight spatial neighbors does, or when a saturated pixel sits within
`line_reach` additional pixels beyond the direct neighbor along the sensor
readout line (charge blooming travels along the readout direction; the
line is a row by default, configurable to columns).  For a single
saturated interior pixel with line_reach = 5 this excludes 19 positions:
the pixel, its 8 neighbors, and 5 further pixels on each side along the
line.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

SATURATION_THRESHOLD = 0.985  # 1008/1023 of a 10-bit range
LINE_REACH = 5

BAYER_TYPES = 3  # R, G, B


@dataclass
class ExposureSeries:
    """Bright exposure stack: means mu[i, j, k, l], times t_l, Bayer map."""

    mu: np.ndarray  # (I, J, K, L) in [0, 1]
    times: np.ndarray  # (L,) seconds, strictly increasing
    bayer: np.ndarray  # (I, J) ints in {0, 1, 2}

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.times = np.asarray(self.times, dtype=np.float64)
        self.bayer = np.asarray(self.bayer, dtype=np.int64)
        if self.mu.ndim != 4:
            raise ValueError(f"series must be (I, J, K, L), got {self.mu.shape}")
        if self.times.shape != (self.mu.shape[3],):
            raise ValueError("exposure times do not match the series")
        if np.any(self.times <= 0) or np.any(np.diff(self.times) <= 0):
            raise ValueError("exposure times must be positive and increasing")
        if self.bayer.shape != self.mu.shape[:2]:
            raise ValueError("Bayer map does not match the spatial dims")
        if self.bayer.min() < 0 or self.bayer.max() >= BAYER_TYPES:
            raise ValueError("Bayer indices must be in {0, 1, 2}")
        if self.mu.min() < 0 or self.mu.max() > 1:
            raise ValueError("grey means must lie in [0, 1]")


@dataclass
class DarkModel:
    """Dark signal offset and slope; arrays (per pixel) or scalars (global)."""

    offset: np.ndarray | float
    current: np.ndarray | float
    per_pixel: bool = True

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if self.per_pixel:
            return np.asarray(self.offset)[..., None] + np.asarray(self.current)[
                ..., None
            ] * t
        return self.offset + self.current * t


@dataclass
class CalibResult:
    vignetting: np.ndarray  # (I, J); NaN where unrecoverable
    responsivity: np.ndarray  # (K, 3); NaN where unrecoverable
    bayer: np.ndarray  # (I, J)
    residual: float
    unrecoverable_pixels: list[tuple[int, int]] = field(default_factory=list)
    unrecoverable_responsivities: list[tuple[int, int]] = field(default_factory=list)
    objective_trace: list[float] = field(default_factory=list)


def fit_dark(
    mu_dark: np.ndarray, times: np.ndarray, per_pixel: bool = True
) -> DarkModel:
    """Least-squares dark model offset + current * t from a dark stack.

    mu_dark is (I, J, L) with one mean dark frame per exposure time.
    """
    mu_dark = np.asarray(mu_dark, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    if mu_dark.ndim != 3 or mu_dark.shape[2] != times.size:
        raise ValueError("dark stack and exposure times are inconsistent")
    if times.size < 2:
        raise ValueError("need at least two exposures to fit the dark model")
    if np.ptp(times) == 0:
        raise ValueError("exposure times are all equal; slope is unidentifiable")
    t_mean = times.mean()
    t_var = ((times - t_mean) ** 2).sum()
    if per_pixel:
        y_mean = mu_dark.mean(axis=2)
        slope = ((times - t_mean) * (mu_dark - y_mean[..., None])).sum(axis=2) / t_var
        offset = y_mean - slope * t_mean
        return DarkModel(offset=offset, current=slope, per_pixel=True)
    y = mu_dark.mean(axis=(0, 1))
    slope = float(((times - t_mean) * (y - y.mean())).sum() / t_var)
    offset = float(y.mean() - slope * t_mean)
    return DarkModel(offset=offset, current=slope, per_pixel=False)


def saturation_mask(
    series: ExposureSeries,
    threshold: float = SATURATION_THRESHOLD,
    line_reach: int = LINE_REACH,
    line_axis: str = "row",
) -> np.ndarray:
    """Boolean (I, J, K, L) mask of measurements to exclude (True = excluded).

    line_axis selects the readout direction: "row" (default) extends the
    blooming mask along the saturated pixel's row (varying j), "col" along
    its column (varying i).
    """
    if line_axis not in ("row", "col"):
        raise ValueError(f"line_axis must be 'row' or 'col', got {line_axis!r}")
    sat = series.mu > threshold
    masked = sat.copy()
    # 8-connected spatial neighbors.
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            masked |= _shift2(sat, di, dj)
    # Readout line: line_reach additional pixels beyond the direct neighbor.
    for d in range(2, line_reach + 2):
        for sgn in (-1, 1):
            if line_axis == "row":
                masked |= _shift2(sat, 0, sgn * d)
            else:
                masked |= _shift2(sat, sgn * d, 0)
    return masked


def _shift2(x: np.ndarray, di: int, dj: int) -> np.ndarray:
    """Shift along the two leading axes, zero-filling the border."""
    out = np.zeros_like(x)
    src_i = slice(max(0, -di), x.shape[0] - max(0, di))
    dst_i = slice(max(0, di), x.shape[0] - max(0, -di))
    src_j = slice(max(0, -dj), x.shape[1] - max(0, dj))
    dst_j = slice(max(0, dj), x.shape[1] - max(0, -dj))
    out[dst_i, dst_j] = x[src_i, src_j]
    return out


def exposure_weights(times: np.ndarray) -> np.ndarray:
    """Inverse-exposure weights normalized to sum to one."""
    w = 1.0 / np.asarray(times, dtype=np.float64)
    return w / w.sum()


def fit_vignetting_responsivity(
    series: ExposureSeries,
    dark: DarkModel,
    mask: np.ndarray,
    max_sweeps: int = 200,
    rel_tol: float = 1e-8,
) -> CalibResult:
    """Alternating weighted least squares for the vignetting and responsivity.

    Each half sweep solves one factor exactly with the other frozen, so the
    objective is non-increasing per half sweep.  Pixels or (filter, Bayer)
    entries without any usable measurement are reported as unrecoverable
    and excluded; the fit proceeds on the rest.
    """
    mu = series.mu
    n_i, n_j, n_k, n_l = mu.shape
    if mask.shape != mu.shape:
        raise ValueError("mask does not match the series")
    resid = mu - dark.evaluate(series.times)[:, :, None, :]
    w = exposure_weights(series.times)

    keep = (~mask).astype(np.float64)
    bayer_onehot = np.zeros((n_i, n_j, BAYER_TYPES))
    bayer_onehot[np.arange(n_i)[:, None], np.arange(n_j)[None, :], series.bayer] = 1.0

    wt = w * series.times  # (L,)
    wt2 = w * series.times**2

    v = np.ones((n_i, n_j))
    r = np.ones((n_k, BAYER_TYPES))
    valid_v = np.ones((n_i, n_j), dtype=bool)
    valid_r = np.ones((n_k, BAYER_TYPES), dtype=bool)

    # Per-measurement sufficient statistics against t, masked.
    num_tl = (keep * resid * wt).sum(axis=3)  # (I, J, K)
    den_tl = (keep * wt2[None, None, None, :]).sum(axis=3)  # (I, J, K)

    def objective() -> float:
        rmap = np.nan_to_num(_r_map(), nan=0.0)
        vv = np.nan_to_num(v, nan=0.0)
        model = vv[:, :, None, None] * rmap[..., None] * series.times
        diff = resid - model
        return float((keep * _validity()[..., None] * w * diff * diff).sum())

    def _r_map() -> np.ndarray:
        # r expanded to (I, J, K) through the Bayer map.
        return r[:, series.bayer].transpose(1, 2, 0)

    def _validity() -> np.ndarray:
        # (I, J, K) of jointly recoverable entries.
        return (
            valid_v[:, :, None] & valid_r[:, series.bayer].transpose(1, 2, 0)
        ).astype(np.float64)

    trace = [objective()]
    for _ in range(max_sweeps):
        # r update: exact minimizer per (k, bayer type).
        vmap = v.copy()
        vmap[~valid_v] = 0.0
        num = np.einsum("ijk,ijn,ij->kn", num_tl, bayer_onehot, vmap)
        den = np.einsum("ijk,ijn,ij->kn", den_tl, bayer_onehot, vmap * vmap)
        bad_r = den <= 0
        new_r = np.where(bad_r, np.nan, num / np.where(bad_r, 1.0, den))
        valid_r &= ~bad_r
        r = np.where(valid_r, new_r, np.nan)
        trace.append(objective())

        # v update: exact minimizer per pixel.
        rmap = _r_map().copy()
        rmap[~valid_r[:, series.bayer].transpose(1, 2, 0)] = 0.0
        num = (num_tl * rmap).sum(axis=2)
        den = (den_tl * rmap * rmap).sum(axis=2)
        bad_v = den <= 0
        v = np.where(bad_v, np.nan, num / np.where(bad_v, 1.0, den))
        valid_v &= ~bad_v
        trace.append(objective())

        if len(trace) >= 3:
            prev, cur = trace[-3], trace[-1]
            if prev <= 0 or (prev - cur) / max(prev, 1e-30) < rel_tol:
                break

    # Gauge: mean vignetting of recoverable pixels is one.
    scale = float(np.mean(v[valid_v]))
    if scale <= 0:
        warnings.warn("degenerate vignetting scale; gauge not applied")
    else:
        v = v / scale
        r = r * scale

    unrecoverable_px = [tuple(idx) for idx in np.argwhere(~valid_v)]
    unrecoverable_r = [tuple(idx) for idx in np.argwhere(~valid_r)]
    return CalibResult(
        vignetting=v,
        responsivity=r,
        bayer=series.bayer.copy(),
        residual=trace[-1],
        unrecoverable_pixels=unrecoverable_px,
        unrecoverable_responsivities=unrecoverable_r,
        objective_trace=trace,
    )


def _axis_tiles(dim: int, tile: int, stride: int) -> list[tuple[int, int]]:
    if tile >= dim:
        return [(0, dim)]
    starts = list(range(0, dim - tile + 1, stride))
    if starts[-1] != dim - tile:
        starts.append(dim - tile)
    return [(s, s + tile) for s in starts]


def fit_vignetting_responsivity_tiled(
    series: ExposureSeries,
    dark: DarkModel,
    mask: np.ndarray,
    tile: tuple[int, int] = (64, 64),
    overlap: float = 0.5,
    **fit_kwargs,
) -> CalibResult:
    """Spatially tiled variant of the factorized fit for large sensors.

    Tiles are fitted independently and merged: each tile's per-Bayer-type
    scale is aligned to the first tile that recovered that type (the model
    is invariant under v -> c * v, r -> r / c per Bayer type, so tiles only
    agree after alignment), vignetting values are averaged where tiles
    overlap, and the merged result is re-gauged to mean(v) = 1.
    """
    n_i, n_j, n_k, _ = series.mu.shape
    stride_i = max(1, int(round(tile[0] * (1.0 - overlap))))
    stride_j = max(1, int(round(tile[1] * (1.0 - overlap))))
    tiles_i = _axis_tiles(n_i, tile[0], stride_i)
    tiles_j = _axis_tiles(n_j, tile[1], stride_j)

    v_sum = np.zeros((n_i, n_j))
    v_cnt = np.zeros((n_i, n_j))
    r_sum = np.zeros((n_k, BAYER_TYPES))
    r_cnt = np.zeros((n_k, BAYER_TYPES))
    ref_r = np.full((n_k, BAYER_TYPES), np.nan)
    dark_is_array = dark.per_pixel and np.ndim(dark.offset) == 2

    for i0, i1 in tiles_i:
        for j0, j1 in tiles_j:
            sub = ExposureSeries(
                mu=series.mu[i0:i1, j0:j1],
                times=series.times,
                bayer=series.bayer[i0:i1, j0:j1],
            )
            sub_dark = (
                DarkModel(
                    offset=np.asarray(dark.offset)[i0:i1, j0:j1],
                    current=np.asarray(dark.current)[i0:i1, j0:j1],
                    per_pixel=True,
                )
                if dark_is_array
                else dark
            )
            res = fit_vignetting_responsivity(
                sub, sub_dark, mask[i0:i1, j0:j1], **fit_kwargs
            )
            v_t = res.vignetting.copy()
            r_t = res.responsivity.copy()
            for n in range(BAYER_TYPES):
                col_ok = np.isfinite(r_t[:, n])
                if not col_ok.any():
                    continue
                if not np.isfinite(ref_r[:, n]).any():
                    ref_r[col_ok, n] = r_t[col_ok, n]
                    c = 1.0
                else:
                    both = col_ok & np.isfinite(ref_r[:, n])
                    if not both.any():
                        continue
                    c = float(np.mean(ref_r[both, n] / r_t[both, n]))
                sel = sub.bayer == n
                v_t[sel] /= c
                aligned = c * r_t[:, n]
                r_sum[col_ok, n] += aligned[col_ok]
                r_cnt[col_ok, n] += 1
            good = np.isfinite(v_t)
            v_sum[i0:i1, j0:j1][good] += v_t[good]
            v_cnt[i0:i1, j0:j1][good] += 1

    v = np.where(v_cnt > 0, v_sum / np.maximum(v_cnt, 1), np.nan)
    r = np.where(r_cnt > 0, r_sum / np.maximum(r_cnt, 1), np.nan)
    valid_v = v_cnt > 0
    scale = float(np.mean(v[valid_v])) if valid_v.any() else 1.0
    if scale > 0:
        v = v / scale
        r = r * scale
    resid = _model_residual(series, dark, mask, v, r)
    return CalibResult(
        vignetting=v,
        responsivity=r,
        bayer=series.bayer.copy(),
        residual=resid,
        unrecoverable_pixels=[tuple(idx) for idx in np.argwhere(~valid_v)],
        unrecoverable_responsivities=[tuple(idx) for idx in np.argwhere(r_cnt == 0)],
    )


def _model_residual(series, dark, mask, v, r) -> float:
    resid = series.mu - dark.evaluate(series.times)[:, :, None, :]
    w = exposure_weights(series.times)
    rmap = np.nan_to_num(r[:, series.bayer].transpose(1, 2, 0), nan=0.0)
    vv = np.nan_to_num(v, nan=0.0)
    model = vv[:, :, None, None] * rmap[..., None] * series.times
    keep = (~mask).astype(np.float64)
    ok = (np.isfinite(v)[:, :, None] & np.isfinite(r)[:, series.bayer].transpose(1, 2, 0))
    diff = resid - model
    return float((keep * ok[..., None] * w * diff * diff).sum())


def apply_calibration(
    raw: np.ndarray, t: float, calib: CalibResult, dark: DarkModel
) -> tuple[np.ndarray, np.ndarray]:
    """Invert the camera model on a raw (I, J, K) exposure at time t.

    Returns (corrected, valid) where corrected = (raw - dark) / (v * r * t);
    entries with non-finite or near-zero denominators are NaN with
    valid = False.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 3 or raw.shape[:2] != calib.vignetting.shape:
        raise ValueError(f"raw image {raw.shape} does not match the calibration")
    dark_val = (
        dark.evaluate(np.array([t]))[..., 0] if dark.per_pixel else dark.evaluate(t)
    )
    r_map = calib.responsivity[:, calib.bayer].transpose(1, 2, 0)  # (I, J, K)
    denom = calib.vignetting[:, :, None] * r_map * float(t)
    valid = np.isfinite(denom) & (np.abs(denom) >= 1e-12)
    corrected = np.full_like(raw, np.nan)
    num = raw - (dark_val[..., None] if np.ndim(dark_val) == 2 else dark_val)
    corrected[valid] = num[valid] / denom[valid]
    return corrected, valid
