"""Shared fixtures: synthetic datasets rendered once per session."""

import numpy as np
import pytest

from roadcalib import Config, load_dataset, synthetic


@pytest.fixture(scope="session")
def compact_spec():
    return synthetic.compact_scene()


@pytest.fixture(scope="session")
def compact_dataset_dir(tmp_path_factory, compact_spec):
    out = tmp_path_factory.mktemp("compact") / "data"
    synthetic.render_dataset(compact_spec, out, seed=0)
    return out


@pytest.fixture(scope="session")
def compact_dataset(compact_dataset_dir):
    return load_dataset(compact_dataset_dir)


@pytest.fixture(scope="session")
def compact_truth(compact_spec):
    return synthetic.truth(compact_spec)


@pytest.fixture(scope="session")
def default_spec():
    return synthetic.default_scene()


@pytest.fixture(scope="session")
def default_dataset_dir(tmp_path_factory, default_spec):
    out = tmp_path_factory.mktemp("default") / "data"
    synthetic.render_dataset(default_spec, out, seed=0)
    return out


@pytest.fixture(scope="session")
def default_dataset(default_dataset_dir):
    return load_dataset(default_dataset_dir)


@pytest.fixture(scope="session")
def default_truth(default_spec):
    return synthetic.truth(default_spec)


@pytest.fixture(scope="session")
def default_pipeline(default_dataset, default_truth, cfg):
    """(gmap, analyses, selected, frames) of the default dataset at truth."""
    from roadcalib.pipeline import analyze_images, build_map, prepare_frames, select_frames

    gmap = build_map(default_dataset, cfg)
    analyses = analyze_images(default_dataset, cfg)
    selected = select_frames(analyses, cfg)
    frames = prepare_frames(default_dataset, gmap, analyses, selected, default_truth, cfg)
    return gmap, analyses, selected, frames


@pytest.fixture(scope="session")
def cfg():
    return Config()


@pytest.fixture(scope="session")
def compact_pipeline(compact_dataset, compact_truth, cfg):
    """(gmap, analyses, selected, frames) of the compact dataset at truth."""
    from roadcalib.pipeline import analyze_images, build_map, prepare_frames, select_frames

    gmap = build_map(compact_dataset, cfg)
    analyses = analyze_images(compact_dataset, cfg)
    selected = select_frames(analyses, cfg)
    frames = prepare_frames(compact_dataset, gmap, analyses, selected, compact_truth, cfg)
    return gmap, analyses, selected, frames


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
