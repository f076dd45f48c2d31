"""Walk through the two-way decomposition on a small worked example.

A design matrix X is decomposed as X = U S V^T where the factors are
orthonormal in the geometry of a row kernel H and a column kernel Q:
U^T H U = I and V^T Q V = I.  With H = Q = I this is the plain SVD; with
informative kernels the leading components align with directions that
the kernels consider smooth.
"""

import numpy as np

from gmdkit import TwoWayDataset, gmd, hq_norm

# A 3 x 2 design with a diagonal row kernel that up-weights the second
# sample and a column kernel that up-weights the first variable.
X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
H = np.diag([1.0, 2.0, 1.0])
Q = np.diag([2.0, 1.0])

data = TwoWayDataset(X=X, H=H, Q=Q)
factors = gmd(data)

print("decomposition values:", factors.s)
print("expected:            ", [np.sqrt(5.0), np.sqrt(2.0)])

# The factor identities hold to machine precision.
K = factors.K
print("U^T H U - I:", np.abs(factors.U.T @ H @ factors.U - np.eye(K)).max())
print("V^T Q V - I:", np.abs(factors.V.T @ Q @ factors.V - np.eye(K)).max())
print("reconstruction:",
      np.abs(X - (factors.U * factors.s) @ factors.V.T).max())

# The squared values decompose the weighted norm of X.
print("sum of squared values:", np.sum(factors.s**2))
print("squared weighted norm:", hq_norm(X, H, Q) ** 2)

# With identity kernels the values match the ordinary singular values.
plain = gmd(TwoWayDataset(X=X, H=np.eye(3), Q=np.eye(2)))
print("identity-kernel values:", plain.s)
print("numpy SVD:             ", np.linalg.svd(X, compute_uv=False))
