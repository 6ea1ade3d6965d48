"""Backend parity: the compiled kernels must match the numpy fallback."""

from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest

from bevshare import _kernels
from bevshare._kernels import numpy_impl

from conftest import random_quad

cykernels = pytest.importorskip(
    "bevshare._kernels._cykernels", reason="compiled extension not built"
)


def _random_stack(rng, n_cells=400, channels=5):
    counts = rng.integers(1, 6, size=n_cells)
    offsets = np.zeros(n_cells + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    tokens = rng.standard_normal((int(offsets[-1]), channels))
    return tokens, offsets


def test_fuse_cells_backends_agree(rng):
    for _ in range(5):
        tokens, offsets = _random_stack(rng)
        out_py = numpy_impl.fuse_cells(tokens, offsets)
        out_cy = np.asarray(cykernels.fuse_cells(tokens, offsets))
        np.testing.assert_allclose(out_cy, out_py, rtol=0, atol=1e-12)


def test_fuse_cells_single_token_bitwise(rng):
    n_cells, channels = 50, 3
    tokens = rng.standard_normal((n_cells, channels))
    offsets = np.arange(n_cells + 1, dtype=np.int64)
    for impl in (numpy_impl, cykernels):
        out = np.asarray(impl.fuse_cells(tokens, offsets))
        assert np.array_equal(out, tokens)


def test_visibility_backends_agree(rng):
    for _ in range(5):
        centers = rng.uniform(-10, 10, size=(300, 2))
        quads = np.stack([random_quad(rng) for _ in range(6)])
        origin = rng.uniform(-2, 2, size=2)
        out_py = numpy_impl.visibility(centers, quads, origin)
        out_cy = np.asarray(cykernels.visibility(centers, quads, origin), dtype=bool)
        assert np.array_equal(out_cy, out_py)


def test_visibility_no_quads_all_visible(rng):
    centers = rng.uniform(-5, 5, size=(40, 2))
    empty = np.zeros((0, 4, 2))
    for impl in (numpy_impl, cykernels):
        assert np.all(np.asarray(impl.visibility(centers, empty, np.zeros(2))))


def test_quad_iou_backends_agree(rng):
    for _ in range(200):
        a, b = random_quad(rng), random_quad(rng)
        v_py = numpy_impl.quad_iou(a, b)
        v_cy = cykernels.quad_iou(a, b)
        assert abs(v_py - v_cy) < 1e-12


def test_active_backend_name():
    assert _kernels.get_backend() in ("python", "cython")
    assert _kernels.fuse_cells is not None


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    if env_value is None:
        env.pop("BEVSHARE_KERNELS", None)
    else:
        env["BEVSHARE_KERNELS"] = env_value
    return subprocess.run(
        [sys.executable, "-c",
         "from bevshare import _kernels; print(_kernels.get_backend())"],
        capture_output=True, text=True, env=env,
    )


def test_env_var_selects_backend():
    forced = _backend_in_subprocess("python")
    assert forced.returncode == 0
    assert forced.stdout.strip() == "python"

    compiled = _backend_in_subprocess("cython")
    assert compiled.returncode == 0
    assert compiled.stdout.strip() == "cython"


def test_env_var_rejects_unknown_value():
    proc = _backend_in_subprocess("fortran")
    assert proc.returncode != 0
    assert "BEVSHARE_KERNELS" in proc.stderr
