import contextlib
import types

import pytest


@pytest.fixture
def announce(capsys):
    """Context manager printing one `[acceptance NN] name: PASS/FAIL` line.

    The body sets ``out.ok`` (and optionally ``out.detail``); the line is
    printed past pytest's capture so it lands on the terminal, and it is
    printed even when the body raises, so every criterion reports exactly
    once per session.
    """

    def _emit(num, name, ok, detail):
        line = f"[acceptance {num:02d}] {name}: {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f"  ({detail})"
        with capsys.disabled():
            print(line)

    @contextlib.contextmanager
    def _criterion(num, name):
        out = types.SimpleNamespace(ok=False, detail="")
        try:
            yield out
        except BaseException:
            _emit(num, name, False, "raised")
            raise
        _emit(num, name, out.ok, out.detail)
        assert out.ok, f"[acceptance {num:02d}] {name}: {out.detail}"

    return _criterion
