import pytest

from affine2f.model import InitialLaw, make_spec


@pytest.fixture(scope="session")
def ref_spec():
    """Mixed subcritical reference model used by the frozen-value tests."""
    return make_spec(
        a=1.2, b=1.0, alpha=0.5, beta=-0.3, gamma=0.8,
        sigma1=0.6, sigma2=0.4, sigma3=0.25, rho=-0.35,
        init=InitialLaw(kind="point", y0=0.7, x0=-0.4),
    )
