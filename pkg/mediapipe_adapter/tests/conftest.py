import numpy as np
import pytest
from PIL import Image


@pytest.fixture(scope="session")
def stock_images(tmp_path_factory):
    """Five small photographs' worth of deterministic random pixels."""
    root = tmp_path_factory.mktemp("stock")
    rng = np.random.default_rng(7)
    paths = []
    for i in range(5):
        img = rng.integers(0, 256, size=(48, 64, 3), dtype=np.uint8)
        path = root / f"stock_{i}.png"
        Image.fromarray(img).save(path)
        paths.append(str(path))
    return paths


@pytest.fixture
def blank_image(tmp_path):
    path = tmp_path / "blank.png"
    Image.fromarray(np.zeros((48, 64, 3), dtype=np.uint8)).save(path)
    return str(path)
