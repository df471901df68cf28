"""Default parameters in one place so ablations are flag changes only.

Values marked (published) come from the published method and evaluation
protocol; the rest are engineering choices.
"""

BAND_WIDTH = 25  # (published) border band radius in pixels
ANCHOR_COUNT = 10  # (published) k for the anchor-normal codebook
MIN_GT_DEPTH = 0.00001  # (published) pixels with gt <= this are not evaluated
DELTA_THRESHOLDS = (1.05, 1.10, 1.25, 1.25**2, 1.25**3)  # (published)
IOU_THRESHOLDS = tuple(k / 100 for k in range(50, 100, 5))  # (published) 0.50..0.95
ANGLE_THRESHOLD_DEG = 30.0  # (published) normal gate for angle-aware AP
SSIM_C1 = 0.0001  # (published)
SSIM_C2 = 0.0009  # (published)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
RANSAC_ITERATIONS = 1000
RANSAC_THRESHOLD = 0.01  # meters
DEPTH_SCALE = 1000.0  # raw units per meter in 16-bit PNGs
OFFSET_RULE = "mean-projection"
BAND_METRIC = "euclidean"
THREADS_ENV = "MIRRORPLANE_THREADS"
