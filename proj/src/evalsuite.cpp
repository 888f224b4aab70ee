#include "igen/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "igen/dataset.hpp"
#include "igen/error.hpp"

namespace igen {

AggregateScore aggregate(std::vector<TaskScore> per_task) {
  if (per_task.empty()) throw NumericError("aggregate: no task scores");
  AggregateScore agg;
  agg.per_task = std::move(per_task);
  double sum = 0.0;
  for (const auto& t : agg.per_task) sum += t.accuracy;
  double n = static_cast<double>(agg.per_task.size());
  agg.mean = sum / n;
  if (agg.per_task.size() > 1) {
    double ss = 0.0;
    for (const auto& t : agg.per_task) {
      double d = t.accuracy - agg.mean;
      ss += d * d;
    }
    agg.sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    agg.sem_defined = true;
  }
  return agg;
}

std::string csv_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string csv_join(const std::vector<std::string>& cells) {
  std::string out;
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    const std::string& c = cells[i];
    if (c.find(',') != std::string::npos || c.find('"') != std::string::npos) {
      out += '"';
      for (char ch : c) {
        if (ch == '"') out += '"';
        out += ch;
      }
      out += '"';
    } else {
      out += c;
    }
  }
  return out;
}

std::string CsvTable::serialize() const {
  std::string out = csv_join(header) + "\n";
  for (const auto& row : rows) out += csv_join(row) + "\n";
  return out;
}

void CsvTable::write(const std::string& path) const {
  atomic_write_file(path, serialize());
}

std::pair<Tensor, Tensor> sym_eig_jacobi(const Tensor& m) {
  if (m.rank() != 2 || m.extent(0) != m.extent(1)) {
    throw NumericError("sym_eig: square matrix required");
  }
  int64_t n = m.extent(0);
  Tensor a = m.clone();
  Tensor v({n, n});
  for (int64_t i = 0; i < n; ++i) v.at2(i, i) = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int64_t p = 0; p < n; ++p) {
      for (int64_t q = p + 1; q < n; ++q) off += a.at2(p, q) * a.at2(p, q);
    }
    if (off < 1e-24) break;
    for (int64_t p = 0; p < n; ++p) {
      for (int64_t q = p + 1; q < n; ++q) {
        double apq = a.at2(p, q);
        if (std::fabs(apq) < 1e-300) continue;
        double app = a.at2(p, p);
        double aqq = a.at2(q, q);
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int64_t k = 0; k < n; ++k) {
          double akp = a.at2(k, p);
          double akq = a.at2(k, q);
          a.at2(k, p) = c * akp - s * akq;
          a.at2(k, q) = s * akp + c * akq;
        }
        for (int64_t k = 0; k < n; ++k) {
          double apk = a.at2(p, k);
          double aqk = a.at2(q, k);
          a.at2(p, k) = c * apk - s * aqk;
          a.at2(q, k) = s * apk + c * aqk;
        }
        for (int64_t k = 0; k < n; ++k) {
          double vkp = v.at2(k, p);
          double vkq = v.at2(k, q);
          v.at2(k, p) = c * vkp - s * vkq;
          v.at2(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int64_t x, int64_t y) {
    return a.at2(x, x) > a.at2(y, y);
  });
  Tensor evals({n});
  Tensor evecs({n, n});
  for (int64_t j = 0; j < n; ++j) {
    int64_t src = order[static_cast<size_t>(j)];
    evals[j] = a.at2(src, src);
    for (int64_t i = 0; i < n; ++i) evecs.at2(i, j) = v.at2(i, src);
  }
  return {std::move(evals), std::move(evecs)};
}

std::vector<PcaPoint> pca_project(
    const std::vector<std::pair<std::string, Tensor>>& training,
    const std::vector<std::pair<std::string, Tensor>>& learned,
    const Tensor& dummy) {
  if (training.empty()) throw NumericError("pca: no training vectors");
  int64_t dim = training[0].second.size();
  // Principal axes come from the training vocabulary alone; learned
  // components are projected into that frame.
  Tensor mean({dim});
  for (const auto& kv : training) mean.add(kv.second);
  mean.scale(1.0 / static_cast<double>(training.size()));

  Tensor cov({dim, dim});
  for (const auto& kv : training) {
    Tensor d = kv.second.clone();
    d.sub(mean);
    for (int64_t i = 0; i < dim; ++i) {
      for (int64_t j = 0; j < dim; ++j) {
        cov.at2(i, j) += d[i] * d[j];
      }
    }
  }
  cov.scale(1.0 / static_cast<double>(training.size() > 1 ? training.size() - 1 : 1));

  auto [evals, evecs] = sym_eig_jacobi(cov);
  auto project = [&](const Tensor& x, double* pc1, double* pc2) {
    double p1 = 0.0, p2 = 0.0;
    for (int64_t i = 0; i < dim; ++i) {
      double centered = x[i] - mean[i];
      p1 += centered * evecs.at2(i, 0);
      p2 += centered * evecs.at2(i, 1);
    }
    *pc1 = p1;
    *pc2 = p2;
  };

  std::vector<PcaPoint> out;
  for (const auto& kv : training) {
    PcaPoint p;
    p.kind = "training";
    p.label = kv.first;
    project(kv.second, &p.pc1, &p.pc2);
    out.push_back(std::move(p));
  }
  {
    PcaPoint p;
    p.kind = "dummy";
    p.label = "";
    project(dummy, &p.pc1, &p.pc2);
    out.push_back(std::move(p));
  }
  for (const auto& kv : learned) {
    PcaPoint p;
    p.kind = "learned";
    p.label = kv.first;
    project(kv.second, &p.pc1, &p.pc2);
    double best = 1e300;
    for (const auto& tr : training) {
      double d2 = 0.0;
      for (int64_t i = 0; i < dim; ++i) {
        double d = kv.second[i] - tr.second[i];
        d2 += d * d;
      }
      if (d2 < best) {
        best = d2;
        p.nearest_training = tr.first;
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace igen
