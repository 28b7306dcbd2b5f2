"""Train the margin classifier on small problems and look at what it learned."""

import numpy as np

from smartbin.svm import KernelSpec, TrainConfig, accuracy, as_examples, decision_value, train

# Two points, one per class, mirrored about the origin. The widest margin puts
# the boundary on the y axis with both points exactly on the margin.
pair = as_examples([[2, 0], [-2, 0]], [1, -1])
model = train(pair, C=1e6)
print("two points   w =", model.w.round(6), " b =", round(model.b, 6) + 0.0)
print("             decision values:", [round(decision_value(model, x.x), 6) for x in pair])

# XOR has no linear separator. An RBF kernel handles it.
xor = as_examples([[1, 1], [-1, -1], [1, -1], [-1, 1]], [1, 1, -1, -1])
for kernel in (KernelSpec.linear(), KernelSpec.rbf(1.0)):
    m = train(xor, kernel, C=10.0)
    print(f"XOR with {kernel.kind:<7} training accuracy {accuracy(m, xor):.2f}")

# A noisy linear problem: the exact dual solver against the stochastic primal one.
rng = np.random.default_rng(0)
X = rng.normal(size=(300, 2))
y = np.where(X @ [1.0, -0.7] + 0.4 * rng.normal(size=300) > 0, 1, -1)
data = as_examples(X, y)
exact = train(data, C=1.0)
sgd = train(data, C=1.0, config=TrainConfig(solver="sgd", max_epochs=100, seed=1))
print(f"noisy data   SMO objective {exact.diagnostics.objective:.4f}   "
      f"SGD objective {sgd.diagnostics.objective:.4f} after {sgd.diagnostics.iterations} epochs")
print(f"             accuracy SMO {accuracy(exact, data):.3f}  SGD {accuracy(sgd, data):.3f}")
