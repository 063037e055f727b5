import numpy as np
import pytest

from docbin.image_model import BinaryImage, GrayImage, RgbImage


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_gray(rng, h, w, lo=0, hi=256):
    return GrayImage(rng.integers(lo, hi, size=(h, w), dtype=np.uint8))


def random_rgb(rng, h, w):
    return RgbImage(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


def random_mask(rng, h, w, p=0.5):
    return BinaryImage(rng.random((h, w)) < p)
