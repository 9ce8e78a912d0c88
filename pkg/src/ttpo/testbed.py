"""The bundled synthetic testbed: a smooth base field, two orthogonal
high-frequency textures, and a two-component Gaussian-mixture prior whose
means carry those textures plus a low-frequency drift.

This is the standing scenario for demos, the g sweep, and the statistical
acceptance checks: the "restored" field is the texture-free base, the win
field carries texture A, the lose field carries texture B, and the prior
believes in both textured versions *shifted by a smooth drift* — so
structural guidance has something real to fight (the generative prior
pulls away from the restored structure, exactly the tension the guided
run must resolve).  Everything derives from fixed seeds, so the scenario
is bit-reproducible.

Run ``python -m ttpo.testbed OUTDIR`` to materialize the fields plus a
ready-to-use pipeline config in a directory.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fieldio import write_field_binary
from .fields import Field, gaussian_lowpass_mask
from .velocity import EmpiricalDatasetField, GaussianMixtureField

BASE_SEED = 7130
DEFAULT_SIZE = 32
DEFAULT_SIGMA = 0.15
DEFAULT_DRIFT_STD = 0.5
TEXTURE_STD = 0.35


def _filtered_noise(rng: np.random.Generator, size: int, d0: float, highpass: bool,
                    std: float) -> np.ndarray:
    """White noise shaped by a Gaussian frequency mask, rescaled to ``std``."""
    noise = rng.standard_normal((size, size))
    mask = gaussian_lowpass_mask(size, size, d0)
    w = mask.highpass if highpass else mask.weights
    shaped = np.fft.ifft2(np.fft.fft2(noise, norm="ortho") * w, norm="ortho").real
    shaped -= shaped.mean()
    return shaped * (std / shaped.std())


@dataclass
class TestBed:
    y0: Field
    yw: Field
    yl: Field
    prior: GaussianMixtureField
    texture_win: Field
    texture_lose: Field
    drift: Field


def make_testbed(
    size: int = DEFAULT_SIZE,
    sigma: float = DEFAULT_SIGMA,
    drift_std: float = DEFAULT_DRIFT_STD,
) -> TestBed:
    rng = np.random.default_rng(BASE_SEED)
    base = _filtered_noise(rng, size, d0=0.2, highpass=False, std=1.0)
    tex_a = _filtered_noise(rng, size, d0=0.5, highpass=True, std=TEXTURE_STD)
    tex_b = _filtered_noise(rng, size, d0=0.5, highpass=True, std=TEXTURE_STD)
    # orthogonalize the lose texture against the win texture so the two
    # preference directions are genuinely distinct
    tex_b = tex_b - tex_a * (np.sum(tex_a * tex_b) / np.sum(tex_a * tex_a))
    tex_b *= TEXTURE_STD / tex_b.std()
    drift = _filtered_noise(rng, size, d0=0.15, highpass=False, std=drift_std)

    y0 = Field(base)
    yw = Field(base + tex_a)
    yl = Field(base + tex_b)
    prior = GaussianMixtureField(
        components=[
            (0.5, Field(base + drift + tex_a), sigma),
            (0.5, Field(base + drift + tex_b), sigma),
        ],
        descriptor="testbed-mixture",
    )
    return TestBed(y0, yw, yl, prior, Field(tex_a), Field(tex_b), Field(drift))


def make_dataset_model(size: int = DEFAULT_SIZE) -> EmpiricalDatasetField:
    """A small dataset-backed velocity model over textured variants,
    used as a second generator in demo configs."""
    tb = make_testbed(size)
    atoms = [tb.yw.copy(), tb.yl.copy(), tb.y0.copy()]
    return EmpiricalDatasetField(atoms, descriptor="testbed-dataset")


def write_demo_dir(outdir) -> Path:
    """Materialize testbed fields and a pipeline config under ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    tb = make_testbed()
    write_field_binary(tb.y0, outdir / "y0.bin")
    write_field_binary(tb.yw, outdir / "yw.bin")
    write_field_binary(tb.yl, outdir / "yl.bin")
    means = [c[1] for c in tb.prior.components]
    write_field_binary(means[0], outdir / "prior_mean_a.bin")
    write_field_binary(means[1], outdir / "prior_mean_b.bin")
    atoms_dir = outdir / "atoms"
    for i, f in enumerate([tb.yw, tb.yl, tb.y0]):
        write_field_binary(f, atoms_dir / f"atom_{i:03d}.bin")
    config = {
        "input": "y0.bin",
        "models": [
            {
                "id": "testbed-mixture",
                "type": "gmm",
                "components": [
                    {"weight": 0.5, "mean": "prior_mean_a.bin", "sigma": DEFAULT_SIGMA},
                    {"weight": 0.5, "mean": "prior_mean_b.bin", "sigma": DEFAULT_SIGMA},
                ],
            },
            {"id": "testbed-dataset", "type": "dataset", "atoms_dir": "atoms"},
        ],
        "optimizer_model": "testbed-mixture",
        "scales": [0.1, 0.15, 0.2, 0.25, 0.3],
        "steps": 50,
        "scorers": ["hf_energy", "neg_total_variation", "mixture_loglik"],
        "selection_mode": "metric",
        "seed": 666666,
        "output_dir": "run",
        "guidance": {
            "alpha": 0.5, "beta": 1.0, "d0": 0.9,
            "t1": 0.7, "t2": 0.1, "steps": 50, "distance": "l1", "seed": 666666,
        },
    }
    (outdir / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    return outdir


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "testbed"
    path = write_demo_dir(target)
    print(f"wrote testbed fields and config.json under {path}")
