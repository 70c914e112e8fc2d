"""Synthetic scenario construction, kinds, and serialization."""

import numpy as np
import pytest

from d2cip.scenario import (SCENARIO_KINDS, ClutterPeak, Occlusion,
                            SyntheticScenario, generate_scenario, make_sequence)

from conftest import static_scenario


class TestTypes:
    def test_clutter_activity_window(self):
        peak = ClutterPeak(position=(10.0, 10.0), velocity=(1.0, 0.0),
                           amplitude=0.5, width=4.0, start=3, stop=6)
        assert not peak.active_at(2)
        assert peak.active_at(3) and peak.active_at(5)
        assert not peak.active_at(6)
        assert peak.position_at(4) == (14.0, 10.0)

    def test_occlusion_validation(self):
        with pytest.raises(ValueError):
            Occlusion(start=0, stop=3, attenuation=1.5)
        with pytest.raises(ValueError):
            Occlusion(start=0, stop=3, attenuation=-0.1)
        with pytest.raises(ValueError):
            ClutterPeak(position=(0.0, 0.0), velocity=(0.0, 0.0),
                        amplitude=-0.5, width=4.0)

    def test_scenario_validation(self):
        with pytest.raises(ValueError):
            SyntheticScenario(width=50, height=50,
                              positions=np.zeros((3, 2)),
                              sizes=np.zeros((3, 2)))  # sizes must be positive
        with pytest.raises(ValueError):
            SyntheticScenario(width=50, height=50,
                              positions=np.zeros((3, 3)),
                              sizes=np.ones((3, 3)))

    def test_truth_accessor(self):
        sc = static_scenario(position=(33.0, 44.0), size=(12.0, 18.0))
        truth = sc.truth(1)
        assert truth.position.tolist() == [33.0, 44.0]
        assert truth.size.tolist() == [12.0, 18.0]


class TestSurface:
    def test_target_listed_first_in_peaks(self):
        sc = static_scenario(clutter=(ClutterPeak(position=(70.0, 70.0),
                                                  velocity=(0.0, 0.0),
                                                  amplitude=0.5, width=4.0),))
        px, py, amps, widths = sc.peaks_at(0)
        assert (px[0], py[0]) == (40.0, 40.0)
        assert amps[0] == 1.0 and amps[1] == 0.5

    def test_occlusion_removes_stated_fraction_in_window(self):
        # attenuation 0.25 leaves 75% of the peak for frames [2, 4)
        sc = static_scenario(n_frames=6, occlusions=(Occlusion(2, 4, 0.25),))
        expected = {0: 1.0, 1: 1.0, 2: 0.75, 3: 0.75, 4: 1.0, 5: 1.0}
        for t, att in expected.items():
            assert sc.target_attenuation(t) == att
            _, _, amps, _ = sc.peaks_at(t)
            assert amps[0] == att

    def test_occlusion_spares_plain_clutter(self):
        shadow = ClutterPeak(position=(70.0, 70.0), velocity=(0.0, 0.0),
                             amplitude=0.5, width=4.0, occludable=True)
        bystander = ClutterPeak(position=(20.0, 70.0), velocity=(0.0, 0.0),
                                amplitude=0.4, width=4.0)
        sc = static_scenario(n_frames=4, clutter=(shadow, bystander),
                             occlusions=(Occlusion(1, 3, 0.2),))
        _, _, amps, _ = sc.peaks_at(2)
        assert np.allclose(amps, [0.8, 0.4, 0.4], rtol=0.0, atol=1e-15)

    def test_inactive_clutter_dropped_from_frame(self):
        pulsed = ClutterPeak(position=(70.0, 70.0), velocity=(0.0, 0.0),
                             amplitude=0.5, width=4.0, start=2, stop=3)
        sc = static_scenario(n_frames=4, clutter=(pulsed,))
        assert len(sc.peaks_at(0)[0]) == 1
        assert len(sc.peaks_at(2)[0]) == 2

    def test_render_matches_surface_at_truth(self):
        sc = static_scenario()
        img = sc.render(0)
        assert img.shape == (96, 96)
        assert img[40, 40] == 1.0


class TestGenerate:
    def test_kinds_enumerated(self):
        assert set(SCENARIO_KINDS) == {"linear", "fast-motion", "occlusion",
                                       "distractor"}

    def test_linear_track_exact(self):
        sc = generate_scenario("linear", {"start": (30.0, 40.0),
                                          "velocity": (2.0, 0.0),
                                          "n_frames": 40})
        t = np.arange(40)
        assert np.array_equal(sc.positions[:, 0], 30.0 + 2.0 * t)
        assert np.array_equal(sc.positions[:, 1], np.full(40, 40.0))

    def test_linear_rejects_escaping_track(self):
        with pytest.raises(ValueError):
            generate_scenario("linear", {"velocity": (10.0, 0.0)})

    def test_fast_motion_spike_window(self):
        sc = generate_scenario("fast-motion", {
            "start": (30.0, 40.0), "velocity": (1.0, 0.0), "n_frames": 30,
            "spike_start": 10, "spike_frames": 5, "spike_delta": (3.0, 0.0)})
        steps = np.diff(sc.positions[:, 0])
        assert np.allclose(steps[:10], 1.0)
        assert np.allclose(steps[10:15], 4.0)
        assert np.allclose(steps[15:], 1.0)

    def test_fast_motion_rejects_escaping_spike(self):
        with pytest.raises(ValueError):
            generate_scenario("fast-motion", {
                "start": (30.0, 40.0), "velocity": (1.0, 0.0), "n_frames": 30,
                "spike_start": 10, "spike_frames": 5, "spike_delta": (0.0, -40.0)})

    def test_occlusion_window_parameters(self):
        sc = generate_scenario("occlusion", {"occlusion_start": 20,
                                             "occlusion_frames": 10,
                                             "attenuation": 0.9})
        assert sc.target_attenuation(19) == 1.0
        assert sc.target_attenuation(20) == pytest.approx(0.1, abs=1e-12)
        assert sc.target_attenuation(29) == pytest.approx(0.1, abs=1e-12)
        assert sc.target_attenuation(30) == 1.0

    def test_distractor_shadows_but_does_not_win(self):
        sc = generate_scenario("distractor", {"distractor_amplitude": 0.8,
                                              "noise_std": 0.0})
        for t in (0, 10, 25, 49):
            img = sc.render(t)
            row, col = np.unravel_index(np.argmax(img), img.shape)
            truth = sc.positions[t]
            assert abs(col - truth[0]) <= 1 and abs(row - truth[1]) <= 1

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            generate_scenario("teleport")

    def test_unknown_params_rejected(self):
        with pytest.raises(ValueError):
            generate_scenario("linear", {"wobble": 3})


class TestSerialization:
    def _fancy_scenario(self):
        clutter = (ClutterPeak(position=(70.0, 70.0), velocity=(0.5, -0.5),
                               amplitude=0.6, width=5.0, start=1, stop=9,
                               occludable=True),)
        occ = (Occlusion(3, 7, 0.4),)
        return static_scenario(n_frames=10, clutter=clutter, occlusions=occ,
                               noise_std=0.02, seed=99, name="fancy")

    def test_round_trip_through_dict(self):
        sc = self._fancy_scenario()
        back = SyntheticScenario.from_dict(sc.to_dict())
        assert back.name == "fancy" and back.seed == 99
        assert np.array_equal(back.positions, sc.positions)
        assert np.array_equal(back.sizes, sc.sizes)
        assert back.clutter == sc.clutter
        assert back.occlusions == sc.occlusions
        assert back.noise_std == sc.noise_std

    def test_round_trip_through_file(self, tmp_path):
        sc = self._fancy_scenario()
        path = tmp_path / "scenario.json"
        sc.save(path)
        back = SyntheticScenario.load(path)
        assert np.array_equal(back.positions, sc.positions)
        assert np.array_equal(back.sizes, sc.sizes)
        assert back.clutter == sc.clutter
        assert back.occlusions == sc.occlusions
        assert (back.width, back.height, back.seed) == (96, 96, 99)

    def test_rejects_foreign_documents(self):
        with pytest.raises(ValueError):
            SyntheticScenario.from_dict({"format": "something-else"})


class TestMakeSequence:
    def test_lazy_frames_by_default(self):
        seq = make_sequence(static_scenario(n_frames=4))
        assert len(seq) == 4
        assert all(f.pixels is None for f in seq.frames)
        assert seq.truth[0].position.tolist() == [40.0, 40.0]

    def test_rendered_frames_in_range(self):
        seq = make_sequence(static_scenario(n_frames=2, noise_std=0.1),
                            render=True)
        for f in seq.frames:
            assert f.pixels is not None
            assert f.pixels.min() >= 0.0 and f.pixels.max() <= 1.0
