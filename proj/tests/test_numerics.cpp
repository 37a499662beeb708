#include <doctest.h>

#include <cmath>
#include <random>

#include "common/error.hpp"
#include "numerics/adam.hpp"
#include "numerics/grad_check.hpp"
#include "numerics/param_io.hpp"
#include "numerics/tape.hpp"

using namespace dvr;
using namespace dvr::num;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

}  // namespace

TEST_CASE("tensor shape invariants") {
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{0, 3}), ShapeError);
  Tensor t(Shape{2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(Tensor::scalar(4).item() == 4);
}

TEST_CASE("forward examples") {
  Tape tape;
  auto sm = softmax(tape.constant(Tensor::row({0, 0})));
  CHECK(sm.value()[0] == doctest::Approx(0.5));
  CHECK(sm.value()[1] == doctest::Approx(0.5));

  auto frames = tape.constant(Tensor::matrix(2, 2, {1, 5, 3, 2}));
  auto pooled = max_pool_over_axis(frames, 0);
  CHECK(pooled.value().data() == std::vector<double>{3, 5});

  std::mt19937_64 rng(3);
  auto x = random_tensor({3, 1}, rng);
  auto eye = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(matmul(tape.constant(eye), tape.constant(x)).value() == x);
}

TEST_CASE("shape errors name the op") {
  Tape tape;
  auto a = tape.constant(Tensor::zeros(2, 3));
  auto b = tape.constant(Tensor::zeros(2, 3));
  try {
    matmul(a, b);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("matmul") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, tape.constant(Tensor::zeros(3, 3))), ShapeError);
  CHECK_THROWS_AS(concat({a, tape.constant(Tensor::zeros(1, 2))}, 0), ShapeError);
}

TEST_CASE("backward examples") {
  ParameterStore store;
  auto& x = store.add("x", "g", Tensor::row({0.3, -1.0, 2.0, 7.0}));
  {
    Tape tape;
    tape.backward(sum(tape.leaf(x)));
    CHECK(x.grad.data() == std::vector<double>{1, 1, 1, 1});
  }
  auto& y = store.add("y", "g", Tensor::row({2.0}));
  {
    Tape tape;
    auto v = tape.leaf(y);
    tape.backward(sum(v * v));
    CHECK(y.grad[0] == doctest::Approx(4.0));
  }
  // Gradients accumulate until zeroed.
  {
    Tape tape;
    auto v = tape.leaf(y);
    tape.backward(sum(v * v));
    CHECK(y.grad[0] == doctest::Approx(8.0));
  }
  store.zero_grad();
  CHECK(y.grad[0] == 0.0);
}

TEST_CASE("backward rejects misuse") {
  ParameterStore store;
  auto& x = store.add("x", "g", Tensor::row({1.0, 2.0}));
  Tape tape;
  auto v = tape.leaf(x);
  CHECK_THROWS_AS(tape.backward(v), ShapeError);
  auto loss = sum(v);
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), InvalidArgument);
}

TEST_CASE("random two-layer tanh network matches finite differences") {
  std::mt19937_64 rng(11);
  ParameterStore store;
  auto& w1 = store.add("w1", "net", random_tensor({4, 6}, rng));
  auto& b1 = store.add("b1", "net", random_tensor({1, 6}, rng));
  auto& w2 = store.add("w2", "net", random_tensor({6, 3}, rng));
  const auto input = random_tensor({5, 4}, rng);
  auto f = [&](Tape& t) {
    auto h = tanh(add(matmul(t.constant(input), t.leaf(w1)), t.leaf(b1)));
    auto out = tanh(matmul(h, t.leaf(w2)));
    return sum(out * out);
  };
  auto params = store.all();
  CHECK(grad_check(f, params) < 1e-4);
}

TEST_CASE("every op passes a gradient check") {
  std::mt19937_64 rng(5);
  ParameterStore store;
  auto& a = store.add("a", "ops", random_tensor({3, 4}, rng));
  auto& b = store.add("b", "ops", random_tensor({3, 4}, rng));
  auto& p = store.add("p", "ops", random_tensor({3, 4}, rng, 0.5, 2.0));
  auto params = store.all();
  const std::vector<std::size_t> rows = {2, 0, 2};
  const std::vector<std::size_t> targets = {1, 3, 0};
  const std::vector<std::pair<std::size_t, std::size_t>> coords = {{0, 1}, {2, 3}, {0, 1}};
  const std::vector<std::pair<const char*, LossBuilder>> cases = {
      {"matmul", [&](Tape& t) { return sum(matmul(t.leaf(a), transpose(t.leaf(b)))); }},
      {"add/sub/mul", [&](Tape& t) { return sum((t.leaf(a) + t.leaf(b)) * (t.leaf(a) - t.leaf(b)) * t.leaf(a)); }},
      {"bias add", [&](Tape& t) { return sum(tanh(add(t.leaf(a), slice(t.leaf(b), 0, 1, 2)))); }},
      {"scale", [&](Tape& t) { return sum(scale(t.leaf(a) * t.leaf(a), -0.7)); }},
      {"concat rows", [&](Tape& t) { return sum(tanh(concat({t.leaf(a), t.leaf(b)}, 0))); }},
      {"concat cols", [&](Tape& t) { return sum(sigmoid(concat({t.leaf(a), t.leaf(b)}, 1))); }},
      {"slice cols", [&](Tape& t) { return sum(tanh(slice(t.leaf(a), 1, 1, 3))); }},
      {"gather rows", [&](Tape& t) { return sum(tanh(gather_rows(t.leaf(a), rows))); }},
      {"gather elements", [&](Tape& t) { return sum(tanh(gather_elements(t.leaf(a), coords))); }},
      {"relu", [&](Tape& t) { return sum(relu(t.leaf(a)) * t.leaf(b)); }},
      {"log", [&](Tape& t) { return sum(log(t.leaf(p))); }},
      {"softmax", [&](Tape& t) { return sum(softmax(t.leaf(a)) * t.leaf(b)); }},
      {"softmax cross entropy", [&](Tape& t) { return softmax_cross_entropy(t.leaf(a), targets); }},
      {"mean", [&](Tape& t) { return mean(tanh(t.leaf(a))); }},
      {"max pool time", [&](Tape& t) { return sum(max_pool_over_axis(t.leaf(a), 0) * slice(t.leaf(b), 0, 0, 1)); }},
      {"max pool cols", [&](Tape& t) { return sum(tanh(max_pool_over_axis(t.leaf(a), 1))); }},
      {"l2 normalize", [&](Tape& t) { return sum(l2_normalize(t.leaf(a)) * t.leaf(b)); }},
      {"cosine matrix", [&](Tape& t) { return sum(tanh(cosine_matrix(t.leaf(a), t.leaf(b)))); }},
  };
  for (const auto& [name, f] : cases) {
    CAPTURE(name);
    CHECK(grad_check(f, params) < 1e-6);
  }
}

TEST_CASE("softmax cross entropy equals a scalar recomputation") {
  std::mt19937_64 rng(9);
  const auto logits = random_tensor({4, 5}, rng, -3, 3);
  const std::vector<std::size_t> targets = {0, 4, 2, 2};
  Tape tape;
  const double got = softmax_cross_entropy(tape.constant(logits), targets).value().item();
  double ref = 0.0;
  for (std::size_t r = 0; r < 4; ++r) {
    double z = 0.0;
    for (std::size_t c = 0; c < 5; ++c) z += std::exp(logits(r, c));
    ref += -(logits(r, targets[r]) - std::log(z));
  }
  CHECK(std::abs(got - ref / 4.0) < 1e-12);
}

TEST_CASE("grad_check edge cases") {
  ParameterStore store;
  std::mt19937_64 rng(2);
  auto& x = store.add("x", "g", random_tensor({1, 8}, rng));
  auto& y = store.add("y", "g", random_tensor({1, 8}, rng));
  auto params = store.all();
  CHECK(grad_check([&](Tape& t) { return sum(cosine_matrix(t.leaf(x), t.leaf(y))); }, params) < 1e-6);
  CHECK(grad_check([&](Tape& t) { return t.constant(Tensor::scalar(3.0)); }, params) == 0.0);
  x.value[0] = NAN;
  CHECK_THROWS_AS(grad_check([&](Tape& t) { return sum(t.leaf(x)); }, params), NumericError);
}

namespace {

// Textbook scalar Adam, one coordinate at a time.
struct ScalarAdam {
  double m = 0, v = 0;
  double step(double x, double g, long t, double lr = 0.001, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, static_cast<double>(t)));
    const double vh = v / (1 - std::pow(b2, static_cast<double>(t)));
    return x - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace

TEST_CASE("adam single step on x^2") {
  ParameterStore store;
  auto& x = store.add("x", "g", Tensor::row({1.0}));
  AdamState st;
  Tape tape;
  auto v = tape.leaf(x);
  tape.backward(sum(v * v));
  auto params = store.all();
  adam_step(st, params);
  CHECK(st.step == 1);
  CHECK(x.value[0] == doctest::Approx(0.999).epsilon(1e-9));
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
  ParameterStore store;
  auto& x = store.add("x", "g", Tensor::row({0.25, -3.0}));
  const auto before = x.value;
  AdamState st;
  auto params = store.all();
  adam_step(st, params);
  CHECK(x.value == before);
}

TEST_CASE("adam groups keep independent moments") {
  std::mt19937_64 rng(4);
  ParameterStore store;
  auto& a = store.add("a", "first", random_tensor({2, 2}, rng));
  auto& b = store.add("b", "second", random_tensor({1, 3}, rng));
  std::vector<ScalarAdam> ref_a(4), ref_b(3);
  std::vector<double> xa(a.value.data()), xb(b.value.data());
  AdamState st;
  auto params = store.all();
  for (long t = 1; t <= 6; ++t) {
    auto ga = random_tensor({2, 2}, rng);
    auto gb = random_tensor({1, 3}, rng);
    // The second group only gets a gradient on odd steps.
    if (t % 2 == 0) gb.fill(0.0);
    a.grad = ga;
    b.grad = gb;
    adam_step(st, params);
    for (std::size_t i = 0; i < 4; ++i) xa[i] = ref_a[i].step(xa[i], ga[i], t);
    for (std::size_t i = 0; i < 3; ++i) xb[i] = ref_b[i].step(xb[i], gb[i], t);
  }
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(a.value[i] - xa[i]) < 1e-15);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(b.value[i] - xb[i]) < 1e-15);
  CHECK(st.moments.size() == 2);
}

TEST_CASE("adam rejects NaN gradients naming the group") {
  ParameterStore store;
  auto& a = store.add("a", "decoder_group", Tensor::row({1.0}));
  auto& b = store.add("b", "other", Tensor::row({2.0}));
  a.grad[0] = NAN;
  b.grad[0] = 1.0;
  AdamState st;
  auto params = store.all();
  try {
    adam_step(st, params);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("decoder_group") != std::string::npos);
  }
  CHECK(b.value[0] == 2.0);
  CHECK(st.step == 0);
}

TEST_CASE("adam skips frozen parameters") {
  ParameterStore store;
  auto& a = store.add("a", "frozen", Tensor::row({1.0}));
  a.requires_grad = false;
  a.grad[0] = 5.0;
  AdamState st;
  auto params = store.all();
  adam_step(st, params);
  CHECK(a.value[0] == 1.0);
}

TEST_CASE("forward determinism") {
  auto run = [] {
    std::mt19937_64 rng(77);
    ParameterStore store;
    auto& w = store.add_uniform("w", "g", {5, 5}, 0.3, rng);
    const auto x = random_tensor({4, 5}, rng);
    Tape tape;
    return softmax(tanh(matmul(tape.constant(x), tape.leaf(w)))).value();
  };
  CHECK(run() == run());
}

TEST_CASE("parameter container round trip") {
  std::mt19937_64 rng(8);
  ParamFile f;
  f.meta["hello"] = "world";
  f.arrays.push_back({"a", random_tensor({3, 2}, rng)});
  f.arrays.push_back({"b", Tensor::row({-0.0, 1e-300, 3.5})});
  const auto bytes = encode_param_file(f);
  CHECK(bytes.substr(0, 8) == "DVRPARAM");
  const auto g = decode_param_file(bytes);
  CHECK(g.meta["hello"] == "world");
  REQUIRE(g.arrays.size() == 2);
  CHECK(*g.find("a") == f.arrays[0].tensor);
  CHECK(*g.find("b") == f.arrays[1].tensor);
  CHECK(g.find("missing") == nullptr);
  CHECK_THROWS_AS(decode_param_file("NOTMAGIC" + bytes.substr(8)), IoError);
  CHECK_THROWS_AS(decode_param_file(bytes.substr(0, bytes.size() - 4)), IoError);
}
