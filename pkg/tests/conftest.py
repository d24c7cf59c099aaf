import pytest


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    """Skeleton cache shared across the whole test session."""
    return str(tmp_path_factory.mktemp("skeleton_cache"))
