"""Reference scene: the 12-object detection table, route results and sorting layout."""

# label, color, x_px, y_px, x_cm, y_cm; labels use the original M/H/B initials.
DETECTION_TABLE = (
    ("M1", "red", 152.20, 148.73, -10.99, 49.70),
    ("M2", "red", 316.04, 84.49, -0.75, 53.72),
    ("M3", "red", 321.66, 271.90, -0.40, 42.01),
    ("M4", "red", 457.26, 196.63, 8.08, 46.71),
    ("H1", "green", 194.99, 83.06, -8.31, 53.81),
    ("H2", "green", 254.80, 182.75, -4.57, 47.58),
    ("H3", "green", 410.32, 89.99, 5.15, 53.38),
    ("H4", "green", 515.76, 257.85, 11.74, 42.88),
    ("B1", "blue", 166.68, 239.52, -10.08, 44.03),
    ("B2", "blue", 360.53, 166.94, 2.03, 48.57),
    ("B3", "blue", 438.88, 286.18, 6.93, 41.11),
    ("B4", "blue", 522.39, 114.16, 12.15, 51.86),
)

# Reference per-route results: label, step, total iterations, initial error, final error.
ROUTE_TABLE = (
    ("M1", 0, 78, 18.85, 0.0305), ("M1", 1, 92, 18.72, 0.0304),
    ("M2", 0, 74, 27.82, 0.0305), ("M2", 1, 91, 27.82, 0.0315),
    ("M3", 0, 93, 22.05, 0.0300), ("M3", 1, 91, 22.05, 0.0302),
    ("M4", 0, 84, 31.28, 0.0306), ("M4", 1, 91, 31.28, 0.0305),
    ("H1", 0, 73, 23.31, 0.0301), ("H1", 1, 77, 16.34, 0.0300),
    ("H2", 0, 81, 17.25, 0.0299), ("H2", 1, 78, 17.25, 0.0313),
    ("H3", 0, 73, 27.48, 0.0308), ("H3", 1, 78, 27.48, 0.0297),
    ("H4", 0, 86, 32.62, 0.0309), ("H4", 1, 79, 32.62, 0.0312),
    ("B1", 0, 84, 12.33, 0.0307), ("B1", 1, 76, 16.48, 0.0310),
    ("B2", 0, 81, 24.08, 0.0302), ("B2", 1, 76, 24.08, 0.0307),
    ("B3", 0, 90, 31.16, 0.0301), ("B3", 1, 78, 31.16, 0.0306),
    ("B4", 0, 75, 33.11, 0.0313), ("B4", 1, 76, 33.11, 0.0302),
)

START_JOINTS = (120.0, 93.0, -132.0)
START_POSITION = (-20.0, 35.0, 20.0)

PLACEMENTS = {
    "red": (-20.0, 35.0, 20.0),
    "green": (-20.0, 45.0, 20.0),
    "blue": (-20.0, 55.0, 20.0),
}
