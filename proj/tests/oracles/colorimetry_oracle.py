"""Independent high-precision sRGB -> CIELAB reference values.

Derives the RGB->XYZ matrix from the sRGB primaries and the D65 white point
(0.95047, 1.0, 1.08883) at 50 significant digits, then evaluates the CIE
L*a*b* function. Output is pasted into tests/colorimetry_test.cpp.
"""
import mpmath as mp

mp.mp.dps = 50

PRIMARIES = [(mp.mpf("0.64"), mp.mpf("0.33")),
             (mp.mpf("0.30"), mp.mpf("0.60")),
             (mp.mpf("0.15"), mp.mpf("0.06"))]
WHITE = [mp.mpf("0.95047"), mp.mpf("1.0"), mp.mpf("1.08883")]


def rgb_to_xyz_matrix():
    cols = [[x / y, mp.mpf(1), (1 - x - y) / y] for x, y in PRIMARIES]
    m = mp.matrix(3, 3)
    for j in range(3):
        for i in range(3):
            m[i, j] = cols[j][i]
    s = mp.lu_solve(m, mp.matrix(WHITE))
    for j in range(3):
        for i in range(3):
            m[i, j] *= s[j]
    return m


def linearize(c):
    v = mp.mpf(c) / 255
    return v / mp.mpf("12.92") if v <= mp.mpf("0.04045") else ((v + mp.mpf("0.055")) / mp.mpf("1.055")) ** mp.mpf("2.4")


def f(t):
    d = mp.mpf(6) / 29
    return mp.cbrt(t) if t > d ** 3 else t / (3 * d * d) + mp.mpf(4) / 29


def lab(rgb, m):
    lin = mp.matrix([linearize(c) for c in rgb])
    xyz = m * lin
    fx, fy, fz = (f(xyz[i] / WHITE[i]) for i in range(3))
    return 116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)


if __name__ == "__main__":
    m = rgb_to_xyz_matrix()
    print("matrix:")
    for i in range(3):
        print("  ", ", ".join(mp.nstr(m[i, j], 17) for j in range(3)))
    print("linear(128) =", mp.nstr(linearize(128), 17))
    samples = [(255, 255, 255), (0, 0, 0), (119, 119, 119), (127.5, 127.5, 127.5),
               (255, 0, 0), (0, 255, 0), (0, 0, 255), (1, 1, 1), (10, 10, 10),
               (50, 60, 70), (200, 150, 120), (224, 172, 138), (141, 85, 36),
               (255, 219, 172), (92, 51, 23), (198, 134, 66), (60, 46, 40),
               (128, 128, 128), (245, 245, 220), (33, 200, 97), (180, 90, 200),
               (3, 7, 11)]
    for s in samples:
        L, a, b = lab(s, m)
        print("{{{}, {}, {}, {}, {}, {}}},".format(*s, mp.nstr(L, 17), mp.nstr(a, 17), mp.nstr(b, 17)))
