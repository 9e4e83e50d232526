import numpy as np
import pytest

from taxelkit.geometry import GRID
from taxelkit.gestures import (N_FRAMES, GestureClass, UserProfile, synth_dataset,
                               synth_recording, user_profile)

QUIET = UserProfile(user_id=0, amplitude_scale=1.0, speed_scale=1.0,
                    location_bias=(0.0, 0.0), noise_level=0.0, seed=1234)


def grid_image(frame):
    """(49, 3) frame -> dict of (row, col) -> force triple for valid cells."""
    cells = GRID.valid_cells()
    return {cells[i]: frame[i] for i in range(49)}


def active_components(frame, frac=0.5):
    """Connected components (4-adjacency) of cells with |fz| above frac*max."""
    fz = np.abs(frame[:, 2])
    threshold = frac * fz.max()
    cells = {cell for i, cell in enumerate(GRID.valid_cells()) if fz[i] > threshold}
    comps = []
    while cells:
        stack = [cells.pop()]
        comp = set()
        while stack:
            r, c = stack.pop()
            comp.add((r, c))
            for nb in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
                if nb in cells:
                    cells.remove(nb)
                    stack.append(nb)
        comps.append(comp)
    return comps


class TestUserProfile:
    def test_deterministic(self):
        assert user_profile(3, 99) == user_profile(3, 99)

    def test_distinct_users(self):
        profiles = [user_profile(u, 42) for u in range(11)]
        assert len({p.seed for p in profiles}) == 11
        assert len({(p.amplitude_scale, p.speed_scale) for p in profiles}) == 11

    def test_scale_bounds(self):
        for u in range(1000):
            p = user_profile(u, 7)
            assert 0.5 <= p.amplitude_scale <= 2.0
            assert 0.5 <= p.speed_scale <= 2.0
            assert p.noise_level >= 0

    def test_invalid_scales_rejected(self):
        with pytest.raises(ValueError):
            UserProfile(0, 3.0, 1.0, (0, 0), 0.0, 1)


class TestSynthRecording:
    def test_shape_and_dtype(self):
        rec = synth_recording(GestureClass.STROKE, QUIET, 5)
        assert rec.frames.shape == (N_FRAMES, 49, 3)
        assert rec.frames.dtype == np.float32
        assert rec.label is GestureClass.STROKE

    def test_deterministic_bitwise(self):
        a = synth_recording(GestureClass.GRAB, QUIET, 17)
        b = synth_recording(GestureClass.GRAB, QUIET, 17)
        assert np.array_equal(a.frames, b.frames)

    def test_seed_changes_recording(self):
        a = synth_recording(GestureClass.GRAB, QUIET, 17)
        b = synth_recording(GestureClass.GRAB, QUIET, 18)
        assert not np.array_equal(a.frames, b.frames)

    @pytest.mark.parametrize("gesture", list(GestureClass))
    def test_range_safety(self, gesture):
        profile = user_profile(2, 0)
        rec = synth_recording(gesture, profile, 31)
        assert np.isfinite(rec.frames).all()
        assert (np.abs(rec.frames[:, :, 0]) <= 2.0 + 1e-6).all()
        assert (np.abs(rec.frames[:, :, 1]) <= 2.0 + 1e-6).all()
        assert (rec.frames[:, :, 2] <= 0).all()
        assert (rec.frames[:, :, 2] >= -7.0 - 1e-6).all()

    def test_press_low_shear(self):
        for seed in range(10):
            rec = synth_recording(GestureClass.PRESS, QUIET, seed)
            shear = np.abs(rec.frames[:, :, :2]).sum()
            normal = np.abs(rec.frames[:, :, 2]).sum()
            assert shear / normal < 0.1

    def test_pinch_two_opposing_patches(self):
        for seed in range(10):
            rec = synth_recording(GestureClass.PINCH, QUIET, seed)
            peak = int(np.argmax(np.abs(rec.frames[:, :, 2]).sum(axis=1)))
            frame = rec.frames[peak]
            assert len(active_components(frame)) == 2
            shear_sum = frame[:, :2].sum(axis=0)
            pos = frame[frame[:, 0] > 0.01][:, :2].sum(axis=0)
            assert np.linalg.norm(shear_sum) < 0.1 * np.linalg.norm(pos)

    def test_rub_oscillates(self):
        for seed in range(10):
            rec = synth_recording(GestureClass.RUB, QUIET, seed)
            fz = np.abs(rec.frames[:, :, 2])
            active = fz.sum(axis=1) > 0.2 * fz.sum(axis=1).max()
            x = GRID.positions_cm()[:, 0]
            centroid = (fz[active] * x).sum(axis=1) / fz[active].sum(axis=1)
            centered = centroid - centroid.mean()
            crossings = int(np.sum(np.diff(np.sign(centered)) != 0))
            assert crossings >= 2

    def test_press_slap_envelope_duration(self):
        for seed in range(10):
            press = synth_recording(GestureClass.PRESS, QUIET, seed)
            slap = synth_recording(GestureClass.SLAP, QUIET, seed + 100)

            def duration(rec):
                total = np.abs(rec.frames[:, :, 2]).sum(axis=1)
                return int(np.sum(total > 0.2 * total.max()))

            assert duration(press) >= 5 * duration(slap)

    def test_poke_pinch_normal_overlap_shear_disjoint(self):
        # normal-force peaks overlap between the two classes; the
        # opposing-shear signature separates them cleanly
        def stats(gesture, seeds):
            peaks, opposing = [], []
            for s in seeds:
                rec = synth_recording(gesture, QUIET, s)
                fz_total = np.abs(rec.frames[:, :, 2]).sum(axis=1)
                peak = int(np.argmax(fz_total))
                peaks.append(fz_total[peak])
                shear = rec.frames[peak, :, :2]
                mags = np.linalg.norm(shear, axis=1).sum()
                net = np.linalg.norm(shear.sum(axis=0))
                opposing.append(1.0 - net / mags if mags > 1e-6 else 0.0)
            return np.array(peaks), np.array(opposing)

        seeds = range(100)
        poke_peak, poke_opp = stats(GestureClass.POKE, seeds)
        pinch_peak, pinch_opp = stats(GestureClass.PINCH, seeds)
        # overlapping peak-force intervals
        assert poke_peak.max() > pinch_peak.min() and pinch_peak.max() > poke_peak.min()
        # disjoint opposing-shear metric
        assert poke_opp.max() < pinch_opp.min()

    def test_label_integrity(self):
        for gesture in GestureClass:
            rec = synth_recording(gesture, QUIET, 3)
            assert rec.label is gesture


class TestSynthDataset:
    def test_single_block(self):
        recs = synth_dataset(1, 1, 1, 0)
        assert len(recs) == 13
        assert sorted(int(r.label) for r in recs) == list(range(13))

    def test_counts_and_histogram(self):
        recs = synth_dataset(3, 2, 2, 1)
        assert len(recs) == 3 * 2 * 2 * 13
        hist = np.bincount([int(r.label) for r in recs], minlength=13)
        assert (hist == 3 * 2 * 2).all()

    def test_block_orders_differ(self):
        recs = synth_dataset(1, 2, 1, 5)
        first = [int(r.label) for r in recs[:13]]
        second = [int(r.label) for r in recs[13:]]
        assert first != second  # pseudo-randomized differently per block

    def test_determinism(self):
        a = synth_dataset(2, 1, 1, 9)
        b = synth_dataset(2, 1, 1, 9)
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.frames, rb.frames)

    def test_user_ids_and_recording_ids(self):
        recs = synth_dataset(2, 1, 2, 3)
        assert [r.recording_id for r in recs] == list(range(len(recs)))
        assert {r.user_id for r in recs} == {0, 1}

    def test_invalid_counts(self):
        with pytest.raises(ValueError):
            synth_dataset(0, 1, 1, 0)
