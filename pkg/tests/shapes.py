"""Small synthetic masks and skeletons shared by the tests."""

import numpy as np
from skimage.draw import disk, line


def draw(m, a, b):
    rr, cc = line(*a, *b)
    m[rr, cc] = True
    return m


def stick_plant(h=200, w=120, leaves=((150, 1), (120, -1), (90, 1), (60, -1)), stem=(190, 20)):
    """1-px skeleton: vertical stem in column w//2 with straight leaves alternating sides."""
    m = np.zeros((h, w), bool)
    c = w // 2
    draw(m, (stem[0], c), (stem[1], c))
    for x, side in leaves:
        draw(m, (x, c), (x - 15, c + side * 30))
    return m


def thick(m, radius=1):
    from scipy import ndimage

    return ndimage.binary_dilation(m, iterations=radius)


def shape_corpus():
    """Named masks covering lines, boxes, crosses, disks, rings and plant silhouettes."""
    out = {}
    z = lambda h=40, w=40: np.zeros((h, w), bool)

    m = z(); m[20, 5:30] = True; out["hline"] = m
    m = z(); m[3:35, 12] = True; out["vline"] = m
    m = z(); draw(m, (2, 2), (30, 37)); out["diagonal"] = m
    m = z(); m[5, 5] = True; out["dot"] = m
    for h, w in ((3, 20), (5, 21), (8, 8), (12, 30), (20, 6), (2, 2), (2, 9)):
        m = z(); m[4:4 + h, 4:4 + w] = True; out[f"rect{h}x{w}"] = m
    for t in (1, 3, 5):
        m = z(); m[18:18 + t, 4:36] = True; m[4:36, 18:18 + t] = True; out[f"plus{t}"] = m
    m = z(); draw(m, (3, 3), (36, 36)); draw(m, (3, 36), (36, 3)); out["x"] = m
    for r in (3, 6, 10, 15):
        m = z(); rr, cc = disk((20, 20), r, shape=m.shape); m[rr, cc] = True; out[f"disk{r}"] = m
    m = z(50, 50)
    for c in ((20, 18), (28, 30)):
        rr, cc = disk(c, 10, shape=m.shape); m[rr, cc] = True
    out["two_lobes"] = m
    m = z(); rr, cc = disk((20, 20), 14); m[rr, cc] = True; rr, cc = disk((20, 20), 8); m[rr, cc] = False
    out["ring"] = m
    m = z(); m[5:35, 5:35] = True; m[10:30, 10:30] = False; out["square_ring"] = m
    m = z(); m[5:10, 5:35] = True; m[5:35, 5:10] = True; out["ell"] = m
    m = z(); m[5:9, 5:35] = True; m[5:35, 18:22] = True; out["tee"] = m
    m = z(); m[5:10, 5:12] = True; m[25:35, 25:35] = True; out["two_blobs"] = m
    m = z(); m[5:35, 5:35] = True; m[15:25, 15:25] = False; m[19:21, 5:15] = False
    out["c_shape"] = m
    rng = np.random.default_rng(3)
    for k in range(3):
        m = rng.random((30, 30)) < 0.55
        out[f"noise{k}"] = m
    out["stick_plant"] = thick(stick_plant(), 1)
    out["stick_plant_wide"] = thick(stick_plant(), 3)
    out["stick_plant_dense"] = thick(stick_plant(leaves=((170, 1), (150, -1), (130, 1), (110, -1), (90, 1), (70, -1))), 2)
    return out
