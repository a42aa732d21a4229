"""Homography, cylinder and the half-cylinder warp on a handful of points."""
import numpy as np

from halfcyl import CylindricalParams, HalfCylWarp, Homography, Side

H = Homography(np.array([[0.9, 0.02, 250.0], [-0.01, 0.95, 10.0], [-2e-4, 5e-5, 1.0]]))
with np.printoptions(precision=4):
    print("canonical H, largest entry scaled to +1:\n", H.m)

# a point and its round trip
X, Y = H.map(100.0, 50.0)
print("H(100, 50) =", (float(X), float(Y)), " back:", H.inverse().map(X, Y))

# the cylinder leaves x = a0 alone and compresses heights further out
c = CylindricalParams(f=600.0, a0=640.0, b0=240.0)
for x in (640.0, 700.0, 900.0, 1200.0):
    top, bot = c.forward(x, 1.0)[1], c.forward(x, 480.0)[1]
    print(f"x={x:6.0f}  height after cylinder {bot - top + 1:7.2f}")

# homography on the overlap side, cylinder after it on the far side
t = HalfCylWarp(H, c, Side.CYL_RIGHT_OF_LINE)
px = np.array([10.0, 300.0, 500.0, 640.0])
py = np.full(4, 240.0)
wx, wy = t.forward(px, py)
print("warped:", np.round(wx, 3), np.round(wy, 3))
bx, by = t.inverse(wx, wy)
print("round trip error:", float(np.max(np.hypot(bx - px, by - py))))
