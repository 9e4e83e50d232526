"""Synthetic touch-gesture generator for the 13 gesture classes.

Each class is realized by a small generative grammar: one or more contact
patches moving over the array, a normal-force envelope, and a shear pattern.
Several pairs are deliberate near-twins in their normal-force statistics
(press vs pull, stroke vs scratch, poke vs pinch) and differ mainly in the
shear pattern, so removing the shear channels measurably hurts a
downstream classifier.

All randomness flows through numpy SeedSequence keys, so generation is
bitwise deterministic and safe to parallelize per recording.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import GRID, NORMAL_MIN_N, SHEAR_MAX_N, TaxelGrid

N_FRAMES = 122
FPS = 25.0
DEFAULT_NOISE_N = 0.05

# Domain-separation tags for seed derivation.
_TAG_PROFILE = 0x50524F46  # "PROF"
_TAG_RECORDING = 0x52454344  # "RECD"
_TAG_BLOCK = 0x424C4F43  # "BLOC"


class GestureClass(enum.IntEnum):
    STROKE = 0
    SCRATCH = 1
    TICKLE = 2
    PAT = 3
    TAP = 4
    SLAP = 5
    POKE = 6
    PINCH = 7
    PULL = 8
    RUB = 9
    PRESS = 10
    GRAB = 11
    SHAKE = 12


assert len(GestureClass) == 13


@dataclass(frozen=True)
class UserProfile:
    """Per-user modulation of gesture templates."""

    user_id: int
    amplitude_scale: float
    speed_scale: float
    location_bias: tuple[float, float]  # cm
    noise_level: float  # N, per axis per taxel
    seed: int

    def __post_init__(self):
        if not (0.5 <= self.amplitude_scale <= 2.0 and 0.5 <= self.speed_scale <= 2.0):
            raise ValueError("profile scales must lie in [0.5, 2.0]")
        if self.noise_level < 0:
            raise ValueError("noise_level must be >= 0")


@dataclass(frozen=True)
class GestureTemplate:
    """Class-level generation parameters before per-user modulation."""

    patch_count: tuple[int, int]
    patch_sigma_cm: tuple[float, float]
    trajectory: str  # static | sweep | oscillate | walk
    amp_range_n: tuple[float, float]
    contact_count: tuple[int, int]
    contact_frames: tuple[int, int]
    sustained: bool
    shear_pattern: str  # none | along_motion | opposing_pair | uniform | alternating
    shear_ratio: tuple[float, float]
    split_amp: bool = False  # divide amplitude across patches (multi-finger contact)
    y_gradient: float = 0.0  # relative fz slope per cm along +y


TEMPLATES: dict[GestureClass, GestureTemplate] = {
    GestureClass.STROKE: GestureTemplate((1, 1), (0.45, 0.9), "sweep", (0.8, 1.8), (1, 1), (0, 0), True, "along_motion", (0.2, 0.4)),
    GestureClass.SCRATCH: GestureTemplate((2, 3), (0.3, 0.6), "sweep", (0.8, 1.8), (1, 1), (0, 0), True, "along_motion", (0.6, 1.0), split_amp=True),
    GestureClass.TICKLE: GestureTemplate((1, 2), (0.3, 0.6), "walk", (0.3, 0.8), (1, 1), (0, 0), True, "along_motion", (0.1, 0.25)),
    GestureClass.PAT: GestureTemplate((1, 1), (1.8, 2.3), "static", (1.5, 3.0), (2, 5), (6, 9), False, "none", (0.0, 0.04)),
    GestureClass.TAP: GestureTemplate((1, 1), (0.4, 0.7), "static", (1.0, 2.5), (2, 6), (3, 5), False, "none", (0.0, 0.05)),
    GestureClass.SLAP: GestureTemplate((1, 1), (2.0, 2.5), "static", (4.5, 6.5), (1, 1), (3, 5), False, "uniform", (0.15, 0.3)),
    GestureClass.POKE: GestureTemplate((1, 1), (0.4, 1.0), "static", (2.0, 4.0), (1, 1), (0, 0), True, "none", (0.0, 0.08)),
    GestureClass.PINCH: GestureTemplate((2, 2), (0.7, 0.7), "static", (2.4, 4.8), (1, 1), (0, 0), True, "opposing_pair", (0.4, 0.8), split_amp=True),
    GestureClass.PULL: GestureTemplate((1, 1), (2.1, 2.6), "static", (2.2, 4.5), (1, 1), (0, 0), True, "uniform", (0.3, 0.6), y_gradient=0.03),
    GestureClass.RUB: GestureTemplate((1, 1), (0.8, 1.2), "oscillate", (1.5, 3.0), (1, 1), (0, 0), True, "alternating", (0.4, 0.7)),
    GestureClass.PRESS: GestureTemplate((1, 1), (2.1, 2.6), "static", (2.2, 4.5), (1, 1), (0, 0), True, "none", (0.0, 0.02)),
    GestureClass.GRAB: GestureTemplate((2, 2), (1.1, 1.4), "static", (2.5, 4.5), (1, 1), (0, 0), True, "opposing_pair", (0.3, 0.6)),
    GestureClass.SHAKE: GestureTemplate((2, 2), (1.1, 1.4), "static", (2.5, 4.5), (1, 1), (0, 0), True, "opposing_pair", (0.3, 0.6)),
}


@dataclass(frozen=True)
class GestureRecording:
    """122-frame labeled recording; frames is (122, 49, 3) float32."""

    frames: np.ndarray
    label: GestureClass
    user_id: int
    recording_id: int
    seed: int

    def __post_init__(self):
        if self.frames.shape != (N_FRAMES, 49, 3):
            raise ValueError(f"recording must be (122, 49, 3), got {self.frames.shape}")


def _seed_int(*entropy: int) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1, np.uint64)[0])


def user_profile(user_id: int, master_seed: int) -> UserProfile:
    """Deterministic per-user template modulation."""
    rng = np.random.default_rng(np.random.SeedSequence([master_seed, user_id, _TAG_PROFILE]))
    return UserProfile(
        user_id=user_id,
        amplitude_scale=float(rng.uniform(0.7, 1.4)),
        speed_scale=float(rng.uniform(0.7, 1.4)),
        location_bias=(float(rng.uniform(-1.5, 1.5)), float(rng.uniform(-1.0, 1.0))),
        noise_level=float(rng.uniform(0.03, 0.07)),
        seed=_seed_int(master_seed, user_id, _TAG_PROFILE, 1),
    )


def _trapezoid(t: np.ndarray, onset: int, offset: int, ramp: int) -> np.ndarray:
    env = np.clip((t - onset + 1) / max(ramp, 1), 0.0, 1.0)
    env *= np.clip((offset - t) / max(ramp, 1), 0.0, 1.0)
    return np.clip(env, 0.0, 1.0)


def _contacts(t: np.ndarray, rng: np.random.Generator, n: int, width: int) -> np.ndarray:
    """n half-sine bumps of the given frame width, spread over the recording."""
    env = np.zeros_like(t, dtype=float)
    slots = np.linspace(8, N_FRAMES - 8 - width, n)
    starts = slots + rng.uniform(-3, 3, size=n)
    for s in starts:
        phase = (t - s) / width
        active = (phase >= 0) & (phase <= 1)
        env[active] = np.maximum(env[active], np.sin(np.pi * phase[active]))
    return env


def _clip_center(xy: np.ndarray, margin: float = 0.5) -> np.ndarray:
    xmax = (GRID.cols - 1) * GRID.pitch_cm
    ymax = (GRID.rows - 1) * GRID.pitch_cm
    xy[..., 0] = np.clip(xy[..., 0], margin, xmax - margin)
    xy[..., 1] = np.clip(xy[..., 1], margin, ymax - margin)
    return xy


class _PatchTrack:
    """One contact patch: per-frame center, normal amplitude, shear vector."""

    def __init__(self, centers: np.ndarray, sigma: float, amp: np.ndarray, shear: np.ndarray,
                 y_gradient: float = 0.0):
        self.centers = centers  # (T, 2) cm
        self.sigma = sigma
        self.amp = amp  # (T,) N, >= 0
        self.shear = shear  # (T, 2) N
        self.y_gradient = y_gradient

    def rasterize(self, grid: TaxelGrid) -> np.ndarray:
        """(T, 49, 3) force contribution via a truncated Gaussian footprint."""
        pos = grid.positions_cm()  # (49, 2)
        diff = self.centers[:, None, :] - pos[None, :, :]  # (T, 49, 2)
        d2 = np.sum(diff**2, axis=-1)
        w = np.exp(-d2 / (2.0 * self.sigma**2))
        w[d2 > (3.0 * self.sigma) ** 2] = 0.0
        if self.y_gradient != 0.0:
            rel_y = pos[None, :, 1] - self.centers[:, None, 1]
            w = w * np.clip(1.0 + self.y_gradient * rel_y, 0.0, None)
        out = np.empty((self.centers.shape[0], pos.shape[0], 3))
        out[:, :, 0] = w * self.shear[:, 0:1]
        out[:, :, 1] = w * self.shear[:, 1:2]
        out[:, :, 2] = -w * self.amp[:, None]
        return out


def _base_trajectory(tmpl: GestureTemplate, t, rng, profile) -> np.ndarray:
    """Shared per-recording contact path; multi-finger patches ride on it."""
    if tmpl.trajectory == "sweep":
        x0 = rng.uniform(0.0, 2.5)
        x1 = rng.uniform(10.5, 13.0)
        if rng.random() < 0.5:
            x0, x1 = x1, x0
        y = rng.uniform(1.5, 4.5)
        frac = np.clip((t - 8) / (N_FRAMES - 20), 0.0, 1.0)
        centers = np.stack([x0 + (x1 - x0) * frac, np.full_like(frac, y)], axis=-1)
        centers[:, 1] += rng.normal(0.0, 0.1, size=len(t))
    elif tmpl.trajectory == "walk":
        steps = rng.normal(0.0, 0.35, size=(len(t), 2))
        path = np.cumsum(steps, axis=0)
        kernel = np.ones(7) / 7.0
        path = np.stack([np.convolve(path[:, i], kernel, mode="same") for i in range(2)], axis=-1)
        start = np.array([rng.uniform(3, 10), rng.uniform(1.5, 4.5)])
        centers = start + path
    elif tmpl.trajectory == "oscillate":
        x0 = rng.uniform(5.0, 9.0)
        span = rng.uniform(2.0, 4.0)
        freq = rng.uniform(0.8, 1.2) * profile.speed_scale
        y = rng.uniform(1.5, 4.5)
        centers = np.stack([x0 + span * np.sin(2 * np.pi * freq * t / FPS),
                            np.full_like(t, y)], axis=-1)
    else:  # static
        start = np.array([rng.uniform(3, 10.5), rng.uniform(1.5, 4.5)])
        centers = np.tile(start, (len(t), 1))
    centers = centers + np.asarray(profile.location_bias)
    return _clip_center(centers)


def synth_recording(gesture: GestureClass, profile: UserProfile, recording_seed: int,
                    recording_id: int = 0) -> GestureRecording:
    """Generate one 122-frame recording of the given class for one user."""
    tmpl = TEMPLATES[gesture]
    rng = np.random.default_rng(
        np.random.SeedSequence([recording_seed, int(gesture), profile.seed, _TAG_RECORDING]))
    t = np.arange(N_FRAMES, dtype=float)

    amp_lo, amp_hi = tmpl.amp_range_n
    base_amp = rng.uniform(amp_lo, amp_hi) * profile.amplitude_scale
    ratio = rng.uniform(*tmpl.shear_ratio)
    sigma = rng.uniform(*tmpl.patch_sigma_cm)

    if gesture is GestureClass.PINCH:
        tracks = _pinch_tracks(t, rng, profile, sigma, base_amp, ratio)
    elif gesture in (GestureClass.GRAB, GestureClass.SHAKE):
        tracks = _grab_tracks(t, rng, profile, sigma, base_amp, ratio,
                              shake=(gesture is GestureClass.SHAKE))
    else:
        base = _base_trajectory(tmpl, t, rng, profile)
        n_patches = int(rng.integers(tmpl.patch_count[0], tmpl.patch_count[1] + 1))
        per_patch_amp = base_amp / n_patches if tmpl.split_amp else base_amp
        tracks = []
        for k in range(n_patches):
            offset = rng.uniform(-0.6, 0.6, size=2) if n_patches > 1 else np.zeros(2)
            centers = _clip_center(base + offset)
            tracks.append(_generic_track(gesture, t, rng, tmpl, centers, sigma,
                                         per_patch_amp, ratio))

    frames = np.zeros((N_FRAMES, 49, 3))
    for track in tracks:
        frames += track.rasterize(GRID)

    # range safety before noise, clamp again after noise
    np.clip(frames[:, :, 0], -SHEAR_MAX_N, SHEAR_MAX_N, out=frames[:, :, 0])
    np.clip(frames[:, :, 1], -SHEAR_MAX_N, SHEAR_MAX_N, out=frames[:, :, 1])
    np.clip(frames[:, :, 2], NORMAL_MIN_N, 0.0, out=frames[:, :, 2])
    if profile.noise_level > 0:
        frames = frames + rng.normal(0.0, profile.noise_level, size=frames.shape)
        np.clip(frames[:, :, 0], -SHEAR_MAX_N, SHEAR_MAX_N, out=frames[:, :, 0])
        np.clip(frames[:, :, 1], -SHEAR_MAX_N, SHEAR_MAX_N, out=frames[:, :, 1])
        np.clip(frames[:, :, 2], NORMAL_MIN_N, 0.0, out=frames[:, :, 2])

    return GestureRecording(frames=frames.astype(np.float32), label=gesture,
                            user_id=profile.user_id, recording_id=recording_id,
                            seed=recording_seed)


def _generic_track(gesture, t, rng, tmpl, centers, sigma, amp_peak, ratio) -> _PatchTrack:
    amp_peak = amp_peak * rng.uniform(0.9, 1.1)  # per-patch spread

    if tmpl.sustained:
        onset = int(rng.integers(8, 20))
        offset = int(rng.integers(N_FRAMES - 20, N_FRAMES - 6))
        env = _trapezoid(t, onset, offset, ramp=6)
    else:
        n = int(rng.integers(tmpl.contact_count[0], tmpl.contact_count[1] + 1))
        width = int(rng.integers(tmpl.contact_frames[0], tmpl.contact_frames[1] + 1))
        env = _contacts(t, rng, n, width)
    amp = amp_peak * env

    shear = np.zeros((len(t), 2))
    s_mag = ratio * amp
    if tmpl.shear_pattern == "along_motion":
        vel = np.gradient(centers, axis=0)
        norm = np.linalg.norm(vel, axis=-1, keepdims=True)
        direction = np.divide(vel, norm, out=np.zeros_like(vel), where=norm > 1e-9)
        shear = direction * s_mag[:, None]
    elif tmpl.shear_pattern == "uniform":
        if gesture is GestureClass.PULL:
            direction = np.array([0.0, -1.0])
        else:
            ang = rng.uniform(0, 2 * np.pi)
            direction = np.array([np.cos(ang), np.sin(ang)])
        shear = direction[None, :] * s_mag[:, None]
    elif tmpl.shear_pattern == "alternating":
        vel_x = np.gradient(centers[:, 0])
        sign = np.tanh(vel_x / 0.05)
        shear[:, 0] = sign * s_mag
    elif tmpl.shear_pattern == "none" and tmpl.shear_ratio[1] > 0:
        ang = rng.uniform(0, 2 * np.pi)
        shear = np.array([np.cos(ang), np.sin(ang)])[None, :] * s_mag[:, None]

    return _PatchTrack(centers, sigma, amp, shear, y_gradient=tmpl.y_gradient)


def _pinch_tracks(t, rng, profile, sigma, base_amp, ratio) -> list[_PatchTrack]:
    """Two grid-aligned patches two pitches apart with exactly opposing shear.

    Grid alignment makes the two footprints congruent, so the opposing shear
    contributions cancel exactly in the frame sum.
    """
    col = int(rng.integers(2, 8))
    row = int(rng.integers(1, 4))
    center = np.array([col * GRID.pitch_cm, row * GRID.pitch_cm])
    half = np.array([GRID.pitch_cm, 0.0])
    onset = int(rng.integers(10, 24))
    offset = int(rng.integers(N_FRAMES - 24, N_FRAMES - 8))
    env = _trapezoid(t, onset, offset, ramp=5)
    amp = (base_amp / 2.0) * env
    s_mag = np.minimum(ratio * base_amp * env, SHEAR_MAX_N)
    # left patch pushes +x, right patch pushes -x: a squeeze
    shear_l = np.stack([s_mag, np.zeros_like(s_mag)], axis=-1)
    shear_r = -shear_l
    cl = np.tile(center - half, (len(t), 1))
    cr = np.tile(center + half, (len(t), 1))
    return [_PatchTrack(cl, sigma, amp, shear_l), _PatchTrack(cr, sigma, amp, shear_r)]


def _grab_tracks(t, rng, profile, sigma, base_amp, ratio, shake: bool) -> list[_PatchTrack]:
    """Wide contacts at opposite y-edges squeezing toward each other."""
    x = rng.uniform(4.0, 9.5) + profile.location_bias[0]
    x = float(np.clip(x, 2.0, 11.5))
    onset = int(rng.integers(6, 14))
    offset = int(rng.integers(N_FRAMES - 22, N_FRAMES - 8))
    env = _trapezoid(t, onset, offset, ramp=3)  # sudden, rough onset
    amp = base_amp * env
    s_mag = ratio * amp

    y_lo, y_hi = 0.75, 5.25
    c_lo = np.tile([x, y_lo], (len(t), 1)).astype(float)
    c_hi = np.tile([x, y_hi], (len(t), 1)).astype(float)
    shear_lo = np.stack([np.zeros_like(s_mag), s_mag], axis=-1)  # pushes +y
    shear_hi = -shear_lo
    if shake:
        freq = rng.uniform(2.0, 4.0) * profile.speed_scale
        osc = np.sin(2 * np.pi * freq * t / FPS)
        c_lo[:, 1] += 0.6 * osc
        c_hi[:, 1] += 0.6 * osc
        c_lo[:, 0] += 0.3 * osc
        c_hi[:, 0] += 0.3 * osc
        mod = 1.0 + 0.35 * osc
        amp = amp * mod
        shear_lo = shear_lo * mod[:, None]
        shear_hi = shear_hi * mod[:, None]
        _clip_center(c_lo)
        _clip_center(c_hi)
    return [_PatchTrack(c_lo, sigma, amp, shear_lo), _PatchTrack(c_hi, sigma, amp, shear_hi)]


def synth_dataset(n_users: int, n_blocks: int, reps_per_block: int,
                  master_seed: int) -> list[GestureRecording]:
    """Full study protocol: every user performs every class reps times per
    block, in a per-block pseudo-randomized order."""
    if min(n_users, n_blocks, reps_per_block) < 1:
        raise ValueError("all counts must be >= 1")
    recordings: list[GestureRecording] = []
    rec_id = 0
    for user in range(n_users):
        profile = user_profile(user, master_seed)
        for block in range(n_blocks):
            order = [GestureClass(c) for c in range(13) for _ in range(reps_per_block)]
            block_rng = np.random.default_rng(
                np.random.SeedSequence([master_seed, user, block, _TAG_BLOCK]))
            block_rng.shuffle(order)
            for k, gesture in enumerate(order):
                rec_seed = _seed_int(master_seed, user, block, k, int(gesture), _TAG_RECORDING)
                recordings.append(synth_recording(gesture, profile, rec_seed, recording_id=rec_id))
                rec_id += 1
    return recordings
