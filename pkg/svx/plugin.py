import pytest

from svx.phantom import PhantomParams, generate_phantom


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-running phantom acceptance sweep')


def _get_phantom_params(request):
    __tracebackhide__ = True
    overrides = getattr(request.module, 'phantom_params', {})
    if not isinstance(overrides, dict):
        raise pytest.UsageError('Module-level "phantom_params" must be a dict of PhantomParams fields.')
    try:
        return PhantomParams(**overrides)
    except TypeError as e:
        raise pytest.UsageError('Invalid "phantom_params": {}'.format(e))


@pytest.fixture
def phantom_factory(request):
    """Callable ``(seed, **overrides) -> Phantom``, built on the module's ``phantom_params``."""
    base = _get_phantom_params(request)
    cache = {}

    def make(seed=None, **overrides):
        fields = base._asdict()
        fields.update(overrides)
        if seed is not None:
            fields['seed'] = seed
        params = PhantomParams(**fields)
        if params not in cache:
            cache[params] = generate_phantom(params)
        return cache[params]

    return make


@pytest.fixture
def phantom(phantom_factory):
    return phantom_factory()
