"""SO(3) helpers: exp/log maps, skew operator and the right Jacobians.

Rotations are plain 3x3 numpy arrays. Perturbations are applied on the
right, ``R @ so3_exp(d)``, everywhere in the package.
"""

import numpy as np

SMALL_ANGLE = 1e-8

_I3 = np.eye(3)


def skew(v):
    """Matrix ``S`` such that ``S @ w == np.cross(v, w)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(m):
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def so3_exp(omega):
    omega = np.asarray(omega, dtype=float)
    theta2 = float(omega @ omega)
    theta = np.sqrt(theta2)
    W = skew(omega)
    if theta < SMALL_ANGLE:
        # second-order Taylor expansion
        return _I3 + W + 0.5 * (W @ W)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / theta2
    return _I3 + a * W + b * (W @ W)


def so3_log(R):
    """Rotation vector of ``R`` with norm in [0, pi].

    At exactly pi the axis sign is fixed so that its largest-magnitude
    component is positive.
    """
    R = np.asarray(R, dtype=float)
    cos_theta = np.clip(0.5 * (np.trace(R) - 1.0), -1.0, 1.0)
    w = vee(R - R.T)
    # atan2 keeps full precision near 0 and pi, unlike arccos
    theta = np.arctan2(0.5 * np.linalg.norm(w), cos_theta)
    if theta < SMALL_ANGLE:
        return 0.5 * w
    if np.pi - theta < 1e-6:
        return _log_near_pi(R, theta, w)
    return (0.5 * theta / np.sin(theta)) * w


def _log_near_pi(R, theta, w):
    # R + R^T = 2 cos(theta) I + 2 (1 - cos(theta)) n n^T
    B = 0.5 * (R + R.T) - np.cos(theta) * _I3
    B /= 1.0 - np.cos(theta)
    k = int(np.argmax(np.diag(B)))
    n = B[:, k] / np.sqrt(max(B[k, k], 1e-300))
    n /= np.linalg.norm(n)
    # the antisymmetric part still carries the sign when theta < pi
    if w @ n < 0.0 and np.linalg.norm(w) > 1e-12:
        n = -n
    elif np.linalg.norm(w) <= 1e-12 and n[np.argmax(np.abs(n))] < 0.0:
        n = -n
    return theta * n


def right_jacobian(omega):
    omega = np.asarray(omega, dtype=float)
    theta2 = float(omega @ omega)
    W = skew(omega)
    if theta2 < 1e-10:
        return _I3 - 0.5 * W + (W @ W) / 6.0
    theta = np.sqrt(theta2)
    return (_I3 - (1.0 - np.cos(theta)) / theta2 * W
            + (theta - np.sin(theta)) / (theta2 * theta) * (W @ W))


def right_jacobian_inv(omega):
    omega = np.asarray(omega, dtype=float)
    theta2 = float(omega @ omega)
    W = skew(omega)
    if theta2 < 1e-10:
        return _I3 + 0.5 * W + (W @ W) / 12.0
    theta = np.sqrt(theta2)
    c = 1.0 / theta2 - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    return _I3 + 0.5 * W + c * (W @ W)


def is_rotation(R, tol=1e-9):
    R = np.asarray(R, dtype=float)
    return (R.shape == (3, 3)
            and np.linalg.norm(R.T @ R - _I3) < tol
            and abs(np.linalg.det(R) - 1.0) < tol)


def project_to_so3(M):
    U, _, Vt = np.linalg.svd(M)
    R = U @ Vt
    if np.linalg.det(R) < 0:
        U[:, -1] *= -1
        R = U @ Vt
    return R


def rot_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_from_rpy(roll, pitch, yaw):
    """Body-to-world rotation for ZYX Euler angles."""
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def rotation_to_quaternion(R):
    """Unit quaternion (x, y, z, w) with w >= 0."""
    from scipy.spatial.transform import Rotation

    q = Rotation.from_matrix(R).as_quat()
    q /= np.linalg.norm(q)
    if q[3] < 0.0:
        q = -q
    return q


def quaternion_to_rotation(q):
    from scipy.spatial.transform import Rotation

    q = np.asarray(q, dtype=float)
    return Rotation.from_quat(q / np.linalg.norm(q)).as_matrix()
