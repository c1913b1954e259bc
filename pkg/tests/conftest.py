"""Shared fixtures: small back-to-back captures and a model trained on them."""

import numpy as np
import pytest

from osnrnn import nn
from osnrnn.emulator import apply_emulator, build_emulator
from osnrnn.features import extract_features
from osnrnn.metrics import SnrValue, get_constellation
from osnrnn.rxdsp import DspConfig, LinkMetadata, receive_frame
from osnrnn.txmodel import TxChannel, gen_symbols, shape_waveform

BAUD = 56e9
B2B_META = LinkMetadata(0.0, 0.0, BAUD, "56-200G")


def back_to_back_frame(snr_db, n_symbols=8192, seed=0, constellation="QPSK", pattern_count=1):
    """RRC channel through an impairment-free emulator with ASE at ``snr_db``."""
    c = get_constellation(constellation)
    sym = gen_symbols(seed, n_symbols, c)
    wave = shape_waveform(TxChannel(sym, c, BAUD, 0.0, 1e-3), 2, 0.1)
    chain = build_emulator(seed, 1, 0.0, 0.0)
    rx = apply_emulator(wave, chain, SnrValue.from_db(snr_db), pattern_count, BAUD, seed=seed + 1000)
    dsp = DspConfig(training_symbols=min(4096, n_symbols * pattern_count))
    return receive_frame(rx, np.tile(sym, (1, pattern_count)), 0.0, BAUD, c, dsp)


@pytest.fixture(scope="session")
def awgn_frame():
    cache = {}

    def make(snr_db, **kw):
        key = (snr_db, tuple(sorted(kw.items())))
        if key not in cache:
            cache[key] = (back_to_back_frame(snr_db, **kw), B2B_META)
        return cache[key]

    return make


@pytest.fixture(scope="session")
def trained_model():
    """Model fitted on back-to-back frames labelled with a 38 dB nonlinear SNR
    (negligible next to the ASE, well inside the default validity band)."""
    feats = [extract_features(back_to_back_frame(s, seed=i), B2B_META).values
             for i, s in enumerate(np.linspace(10, 20, 12))]
    cfg = nn.TrainConfig(max_epochs=300, patience=30, seed=1)
    model, _ = nn.train(np.array(feats), np.full(len(feats), 38.0), cfg)
    return model


SMALL_STUDY = {
    "channel_plan": {"n_channels": 3, "n_symbols": 8192},
    "route": {"min_spans": 1, "max_spans": 3},
    "scenario": {"modes": {"56-200G": 1.0}},
    "emulator": {"pattern_count": 2, "n_segments": 10},
    "dsp": {"training_symbols": 4096},
    "nn": {"max_epochs": 200},
}


@pytest.fixture(scope="session")
def small_config():
    from osnrnn.config import load_config

    return load_config(overrides=SMALL_STUDY)


@pytest.fixture(scope="session")
def small_config_file(tmp_path_factory):
    import yaml

    path = tmp_path_factory.mktemp("cfg") / "small.yaml"
    path.write_text(yaml.safe_dump(SMALL_STUDY))
    return path


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory, small_config):
    """16 quick scenarios with frames, generated once per session."""
    from osnrnn.pipeline import run_generate

    out = tmp_path_factory.mktemp("study")
    run_generate(small_config, 3, 16, out / "dataset.jsonl", frames_dir=out / "frames")
    return out
