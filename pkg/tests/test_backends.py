import os
import subprocess
import sys
from pathlib import Path

import pytest

from petroflow import kernels

ROOT = Path(__file__).resolve().parents[1]


def selected_backend(**env):
    code = "from petroflow import kernels; print(kernels.BACKEND)"
    proc = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                          env={**os.environ, **env}, check=True)
    return proc.stdout.strip()


class TestBackendSelection:
    def test_env_forces_python(self):
        assert selected_backend(PETROFLOW_PURE_PYTHON="1") == "python"

    @pytest.mark.skipif(not kernels.HAVE_COMPILED, reason="extension not built")
    def test_compiled_is_default_when_built(self):
        assert selected_backend(PETROFLOW_PURE_PYTHON="") == "compiled"

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            kernels.get_backend("fortran")

    def test_python_backend_always_available(self):
        assert kernels.get_backend("python").constraints is not None


class TestBenchmarkScript:
    def test_runs(self, tmp_path):
        out = tmp_path / "bench.json"
        proc = subprocess.run([sys.executable, str(ROOT / "benchmarks" / "bench_kernels.py"),
                               "--number", "10", "--solves", "1", "--json", str(out)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert "solve [ms]" in proc.stdout
        assert out.exists()
