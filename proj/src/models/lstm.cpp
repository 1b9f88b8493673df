#include "parkcast/models/lstm.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>

#include "parkcast/common/error.hpp"

namespace parkcast::models {

namespace {

struct Offsets {
  Eigen::Index W, U, b, w_out, b_out, total;
};

Offsets offsets(int p, int h) {
  Offsets o{};
  const Eigen::Index g = 4 * static_cast<Eigen::Index>(h);
  o.W = 0;
  o.U = o.W + g * p;
  o.b = o.U + g * h;
  o.w_out = o.b + g;
  o.b_out = o.w_out + h;
  o.total = o.b_out + 1;
  return o;
}

Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& z) { return 1.0 / (1.0 + (-z).exp()); }

}  // namespace

Eigen::Index LstmParams::size_for(int input_size, int units) { return offsets(input_size, units).total; }

Eigen::Map<const Eigen::MatrixXd> LstmParams::W() const {
  const Offsets o = offsets(input_size, units);
  return {theta.data() + o.W, 4 * units, input_size};
}
Eigen::Map<const Eigen::MatrixXd> LstmParams::U() const {
  const Offsets o = offsets(input_size, units);
  return {theta.data() + o.U, 4 * units, units};
}
Eigen::Map<const Eigen::VectorXd> LstmParams::b() const {
  const Offsets o = offsets(input_size, units);
  return {theta.data() + o.b, 4 * units};
}
Eigen::Map<const Eigen::VectorXd> LstmParams::w_out() const {
  const Offsets o = offsets(input_size, units);
  return {theta.data() + o.w_out, units};
}
double LstmParams::b_out() const { return theta[offsets(input_size, units).b_out]; }

LstmParams init_lstm(int input_size, int units, int lookback, std::uint64_t seed) {
  if (input_size < 1 || units < 1 || lookback < 1) {
    throw ArgumentError("init_lstm: input size, units and lookback must be >= 1");
  }
  LstmParams params;
  params.input_size = input_size;
  params.units = units;
  params.lookback = lookback;
  const Offsets o = offsets(input_size, units);
  params.theta.resize(o.total);
  std::mt19937_64 rng(seed);
  const double gate_bound = 1.0 / std::sqrt(static_cast<double>(input_size + units));
  const double head_bound = 1.0 / std::sqrt(static_cast<double>(units));
  std::uniform_real_distribution<double> gate(-gate_bound, gate_bound);
  std::uniform_real_distribution<double> head(-head_bound, head_bound);
  for (Eigen::Index k = 0; k < o.w_out; ++k) params.theta[k] = gate(rng);
  for (Eigen::Index k = o.w_out; k < o.total; ++k) params.theta[k] = head(rng);
  return params;
}

namespace {

void check_sequence(const LstmParams& params, const Sequence& seq) {
  if (seq.rows() != params.lookback || seq.cols() != params.input_size) {
    throw ArgumentError("lstm: sequence is " + std::to_string(seq.rows()) + "x" + std::to_string(seq.cols()) +
                        ", expected " + std::to_string(params.lookback) + "x" + std::to_string(params.input_size));
  }
}

// Forward pass over a batch, columns are batch members.
struct BatchTrace {
  std::vector<Eigen::MatrixXd> x, i, f, g, o, c, h;  // c[0], h[0] are the zero state
  Eigen::RowVectorXd yhat;
};

BatchTrace forward_batch(const LstmParams& params, std::span<const Sequence> batch) {
  const int p = params.input_size;
  const int H = params.units;
  const int L = params.lookback;
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto W = params.W();
  const auto U = params.U();
  const auto b = params.b();

  BatchTrace tr;
  tr.c.push_back(Eigen::MatrixXd::Zero(H, B));
  tr.h.push_back(Eigen::MatrixXd::Zero(H, B));
  for (int t = 0; t < L; ++t) {
    Eigen::MatrixXd xt(p, B);
    for (Eigen::Index k = 0; k < B; ++k) xt.col(k) = batch[static_cast<std::size_t>(k)].row(t).transpose();
    Eigen::MatrixXd z = W * xt + U * tr.h.back();
    z.colwise() += b;
    Eigen::MatrixXd it = sigmoid(z.topRows(H).array()).matrix();
    Eigen::MatrixXd ft = sigmoid(z.middleRows(H, H).array()).matrix();
    Eigen::MatrixXd gt = z.middleRows(2 * H, H).array().tanh().matrix();
    Eigen::MatrixXd ot = sigmoid(z.bottomRows(H).array()).matrix();
    Eigen::MatrixXd ct = (ft.array() * tr.c.back().array() + it.array() * gt.array()).matrix();
    Eigen::MatrixXd ht = (ot.array() * ct.array().tanh()).matrix();
    tr.x.push_back(std::move(xt));
    tr.i.push_back(std::move(it));
    tr.f.push_back(std::move(ft));
    tr.g.push_back(std::move(gt));
    tr.o.push_back(std::move(ot));
    tr.c.push_back(std::move(ct));
    tr.h.push_back(std::move(ht));
  }
  tr.yhat = params.w_out().transpose() * tr.h.back();
  tr.yhat.array() += params.b_out();
  return tr;
}

}  // namespace

double lstm_forward(const LstmParams& params, const Sequence& seq, GateTrace* trace) {
  check_sequence(params, seq);
  const Sequence* one = &seq;
  const BatchTrace tr = forward_batch(params, std::span<const Sequence>(one, 1));
  if (trace != nullptr) {
    *trace = GateTrace{};
    for (std::size_t t = 0; t < tr.i.size(); ++t) {
      trace->input.push_back(tr.i[t].col(0));
      trace->forget.push_back(tr.f[t].col(0));
      trace->candidate.push_back(tr.g[t].col(0));
      trace->output.push_back(tr.o[t].col(0));
      trace->cell.push_back(tr.c[t + 1].col(0));
      trace->hidden.push_back(tr.h[t + 1].col(0));
    }
  }
  return tr.yhat[0];
}

Eigen::VectorXd predict_lstm(const LstmParams& params, std::span<const Sequence> sequences) {
  for (const auto& s : sequences) check_sequence(params, s);
  Eigen::VectorXd out(static_cast<Eigen::Index>(sequences.size()));
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < sequences.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, sequences.size() - start);
    const BatchTrace tr = forward_batch(params, sequences.subspan(start, len));
    for (std::size_t k = 0; k < len; ++k) out[static_cast<Eigen::Index>(start + k)] = tr.yhat[static_cast<Eigen::Index>(k)];
  }
  return out;
}

double lstm_loss_and_gradient(const LstmParams& params, std::span<const Sequence> batch,
                              std::span<const double> targets, Eigen::VectorXd& grad) {
  if (batch.size() != targets.size() || batch.empty()) {
    throw ArgumentError("lstm_loss_and_gradient: batch and target sizes differ or are empty");
  }
  for (const auto& s : batch) check_sequence(params, s);
  const int p = params.input_size;
  const int H = params.units;
  const int L = params.lookback;
  const auto B = static_cast<Eigen::Index>(batch.size());
  const Offsets off = offsets(p, H);

  const BatchTrace tr = forward_batch(params, batch);
  const Eigen::Map<const Eigen::RowVectorXd> y(targets.data(), B);
  const Eigen::RowVectorXd err = tr.yhat - y;
  const double loss = err.squaredNorm() / static_cast<double>(B);

  grad.setZero(off.total);
  Eigen::Map<Eigen::MatrixXd> dW(grad.data() + off.W, 4 * H, p);
  Eigen::Map<Eigen::MatrixXd> dU(grad.data() + off.U, 4 * H, H);
  Eigen::Map<Eigen::VectorXd> db(grad.data() + off.b, 4 * H);
  Eigen::Map<Eigen::VectorXd> dw_out(grad.data() + off.w_out, H);

  const Eigen::RowVectorXd dy = err * (2.0 / static_cast<double>(B));
  dw_out = tr.h.back() * dy.transpose();
  grad[off.b_out] = dy.sum();

  const auto U = params.U();
  Eigen::MatrixXd dh = params.w_out() * dy;  // H x B
  Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(H, B);
  Eigen::MatrixXd dz(4 * H, B);
  for (int t = L - 1; t >= 0; --t) {
    const auto& i = tr.i[static_cast<std::size_t>(t)].array();
    const auto& f = tr.f[static_cast<std::size_t>(t)].array();
    const auto& g = tr.g[static_cast<std::size_t>(t)].array();
    const auto& o = tr.o[static_cast<std::size_t>(t)].array();
    const auto& c_prev = tr.c[static_cast<std::size_t>(t)].array();
    const Eigen::ArrayXXd tc = tr.c[static_cast<std::size_t>(t) + 1].array().tanh();

    const Eigen::ArrayXXd d_o = dh.array() * tc;
    dc.array() += dh.array() * o * (1.0 - tc.square());
    dz.topRows(H) = (dc.array() * g * i * (1.0 - i)).matrix();
    dz.middleRows(H, H) = (dc.array() * c_prev * f * (1.0 - f)).matrix();
    dz.middleRows(2 * H, H) = (dc.array() * i * (1.0 - g.square())).matrix();
    dz.bottomRows(H) = (d_o * o * (1.0 - o)).matrix();

    dW.noalias() += dz * tr.x[static_cast<std::size_t>(t)].transpose();
    dU.noalias() += dz * tr.h[static_cast<std::size_t>(t)].transpose();
    db += dz.rowwise().sum();
    dh.noalias() = U.transpose() * dz;
    dc.array() *= f;
  }
  return loss;
}

std::vector<Sequence> make_sequences(const Eigen::MatrixXd& X, std::span<const int> groups, int lookback) {
  if (lookback < 1) throw ArgumentError("make_sequences: lookback must be >= 1");
  if (!groups.empty() && static_cast<Eigen::Index>(groups.size()) != X.rows()) {
    throw ArgumentError("make_sequences: groups size differs from row count");
  }
  std::unordered_map<int, std::vector<Eigen::Index>> history;
  std::vector<Sequence> out;
  out.reserve(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    auto& h = history[groups.empty() ? 0 : groups[static_cast<std::size_t>(r)]];
    h.push_back(r);
    Sequence s(lookback, X.cols());
    const auto count = static_cast<Eigen::Index>(h.size());
    for (int t = 0; t < lookback; ++t) {
      const Eigen::Index back = lookback - 1 - t;  // steps before r
      const Eigen::Index pos = std::max<Eigen::Index>(0, count - 1 - back);
      s.row(t) = X.row(h[static_cast<std::size_t>(pos)]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

LstmFit fit_lstm(std::span<const Sequence> sequences, std::span<const double> targets, const LstmOptions& options,
                 std::span<const Sequence> test_sequences, std::span<const double> test_targets) {
  if (sequences.empty()) throw ArgumentError("fit_lstm: no training sequences");
  if (sequences.size() != targets.size()) throw ArgumentError("fit_lstm: sequence and target counts differ");
  if (test_sequences.size() != test_targets.size()) throw ArgumentError("fit_lstm: test sequence and target counts differ");
  if (options.units < 1 || options.epochs < 0 || options.batch_size < 1) {
    throw ArgumentError("fit_lstm: units and batch size must be >= 1, epochs >= 0");
  }
  if (options.lookback < 1 || options.lookback > 8) throw ArgumentError("fit_lstm: lookback must be in 1..8");
  if (!(options.learning_rate > 0.0)) throw ArgumentError("fit_lstm: learning rate must be > 0");
  const auto p = static_cast<int>(sequences.front().cols());
  for (const auto& s : sequences) {
    if (s.rows() != options.lookback || s.cols() != p) throw ArgumentError("fit_lstm: inconsistent sequence shape");
    if (!s.allFinite()) throw ArgumentError("fit_lstm: non-finite input");
  }

  LstmFit fit;
  fit.params = init_lstm(p, options.units, options.lookback, options.seed);
  AdamState adam(fit.params.theta.size(), AdamConfig{options.learning_rate});
  std::mt19937_64 rng(options.seed ^ 0xA5A5A5A5A5A5A5A5ULL);
  std::vector<std::size_t> order(sequences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Sequence> batch;
  std::vector<double> batch_y;
  Eigen::VectorXd grad;
  const auto batch_size = static_cast<std::size_t>(options.batch_size);

  auto mse = [&](std::span<const Sequence> seqs, std::span<const double> ys) {
    const Eigen::VectorXd pred = predict_lstm(fit.params, seqs);
    double s = 0.0;
    for (std::size_t k = 0; k < ys.size(); ++k) {
      const double e = pred[static_cast<Eigen::Index>(k)] - ys[k];
      s += e * e;
    }
    return s / static_cast<double>(ys.size());
  };

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    for (std::size_t k = order.size(); k > 1; --k) {
      std::uniform_int_distribution<std::size_t> pick(0, k - 1);
      std::swap(order[k - 1], order[pick(rng)]);
    }
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t len = std::min(batch_size, order.size() - start);
      batch.clear();
      batch_y.clear();
      for (std::size_t k = 0; k < len; ++k) {
        batch.push_back(sequences[order[start + k]]);
        batch_y.push_back(targets[order[start + k]]);
      }
      const double loss = lstm_loss_and_gradient(fit.params, batch, batch_y, grad);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        throw DivergenceError("fit_lstm: loss became non-finite", epoch);
      }
      adam_update(fit.params.theta, grad, adam);
    }
    const double train = mse(sequences, targets);
    if (!std::isfinite(train) || !fit.params.theta.allFinite()) {
      throw DivergenceError("fit_lstm: loss became non-finite", epoch);
    }
    fit.history.train_mse.push_back(train);
    if (!test_sequences.empty()) fit.history.test_mse.push_back(mse(test_sequences, test_targets));
  }
  return fit;
}

}  // namespace parkcast::models
