"""Independent reference implementations used as test oracles."""
import numpy as np


def textbook_kalman(A, H, Q, R, x0, P0, zs):
    """Plain linear Kalman filter written from the textbook recursion with explicit inverses."""
    x, P = x0.copy(), P0.copy()
    xs, Ps = [], []
    for z in zs:
        x = A @ x
        P = A @ P @ A.T + Q
        K = P @ H.T @ np.linalg.inv(H @ P @ H.T + R)
        x = x + K @ (z - H @ x)
        P = (np.eye(len(x)) - K @ H) @ P
        xs.append(x)
        Ps.append(P)
    return np.array(xs), np.array(Ps)


def constant_velocity_problem(steps=50, dt=0.1, seed=0):
    rng = np.random.default_rng(seed)
    A = np.array([[1.0, dt], [0.0, 1.0]])
    H = np.array([[1.0, 0.0]])
    Q = 1e-3 * np.array([[dt ** 3 / 3, dt ** 2 / 2], [dt ** 2 / 2, dt]])
    R = np.array([[0.25]])
    truth = np.array([0.0, 1.0])
    zs = []
    for _ in range(steps):
        truth = A @ truth + rng.multivariate_normal(np.zeros(2), Q)
        zs.append(H @ truth + rng.normal(0, 0.5, 1))
    return A, H, Q, R, np.array([0.0, 0.5]), np.eye(2), np.array(zs)
