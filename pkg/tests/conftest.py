"""Shared fixtures: a small labeled corpus and one deterministic eye."""

import numpy as np
import pytest

from visiris import synth
from visiris.imaging import EyeImage
from visiris.pipeline import PipelineConfig


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Four identities x two samples with mask sidecars and a manifest."""
    root = tmp_path_factory.mktemp("corpus")
    truths = synth.generate_corpus(root, identities=4, samples=2, seed=4242)
    return root, truths


@pytest.fixture(scope="session")
def synth_eye():
    """One rendered eye, its exact mask, and the geometry it was drawn with."""
    texture = synth.identity_texture(np.random.default_rng(77))
    geometry = dict(cx=320.0, cy=240.0, pupil_radius=45.0, iris_radius=110.0)
    eye, mask = synth.render_eye(
        texture, 0, geometry["cx"], geometry["cy"], geometry["pupil_radius"],
        geometry["iris_radius"], blur_sigma=0.5, noise_sigma=synth.NOISE_SIGMA,
        rng=np.random.default_rng(78),
    )
    return EyeImage(eye), mask, geometry


@pytest.fixture(scope="session")
def default_cfg():
    return PipelineConfig()
