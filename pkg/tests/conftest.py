import mpmath
import pytest


@pytest.fixture(scope="session")
def pi_digits_file(tmp_path_factory):
    """12000 digits of pi from mpmath, independent of the builtin generator."""
    with mpmath.workdps(12050):
        text = mpmath.nstr(mpmath.pi, 12010, strip_zeros=False)
    path = tmp_path_factory.mktemp("digits") / "pi.txt"
    path.write_text(text.replace(".", "")[:12000])
    return path
