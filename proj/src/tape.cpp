#include "ggpp/tape.hpp"

#include <cmath>

#include "ggpp/kernels.hpp"

namespace ggpp {

Tape::Var Tape::push(Tensor value, std::function<void(Tape&)> back) {
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(back)});
    return Var{nodes_.size() - 1};
}

Tape::Var Tape::leaf(Tensor value) { return push(std::move(value), nullptr); }

Tape::Var Tape::matmul(Var a, Var b) {
    Tensor c = ggpp::matmul(val(a), val(b));
    Var out{nodes_.size()};
    return push(std::move(c), [a, b, out](Tape& t) {
        const Tensor& gout = t.g(out);
        const Tensor& av = t.val(a);
        const Tensor& bv = t.val(b);
        // dA += G * B^T
        const std::size_t m = av.shape[0], k = av.shape[1], n = bv.shape[1];
        Tensor& ga = t.g(a);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p)
                ga.at(i, p) += kernels::dot(gout.row(i), bv.row(p), n);
        // dB += A^T * G
        Tensor& gb = t.g(b);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const double av_ip = av.at(i, p);
                if (av_ip != 0.0)
                    kernels::axpy(av_ip, gout.row(i), gb.row(p), n);
            }
    });
}

Tape::Var Tape::matmul_nt(Var a, Var b) {
    Tensor c = ggpp::matmul_nt(val(a), val(b));
    Var out{nodes_.size()};
    return push(std::move(c), [a, b, out](Tape& t) {
        const Tensor& gout = t.g(out); // m x n
        const Tensor& av = t.val(a);   // m x k
        const Tensor& bv = t.val(b);   // n x k
        const std::size_t m = av.shape[0], k = av.shape[1], n = bv.shape[0];
        Tensor& ga = t.g(a);
        Tensor& gb = t.g(b);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double gij = gout.at(i, j);
                if (gij == 0.0) continue;
                kernels::axpy(gij, bv.row(j), ga.row(i), k);
                kernels::axpy(gij, av.row(i), gb.row(j), k);
            }
    });
}

Tape::Var Tape::add(Var a, Var b) {
    Tensor c = ggpp::add(val(a), val(b));
    Var out{nodes_.size()};
    return push(std::move(c), [a, b, out](Tape& t) {
        const Tensor& gout = t.g(out);
        kernels::axpy(1.0, gout.data.data(), t.g(a).data.data(), gout.size());
        kernels::axpy(1.0, gout.data.data(), t.g(b).data.data(), gout.size());
    });
}

Tape::Var Tape::scale(Var x, double alpha) { return affine(x, alpha, 0.0); }

Tape::Var Tape::affine(Var x, double mul, double shift) {
    Tensor c = val(x);
    for (double& v : c.data) v = mul * v + shift;
    Var out{nodes_.size()};
    return push(std::move(c), [x, mul, out](Tape& t) {
        const Tensor& gout = t.g(out);
        kernels::axpy(mul, gout.data.data(), t.g(x).data.data(), gout.size());
    });
}

Tape::Var Tape::softmax_rows(Var x) {
    Tensor s = ggpp::softmax_rows(val(x));
    Var out{nodes_.size()};
    return push(std::move(s), [x, out](Tape& t) {
        const Tensor& sv = t.val(out);
        const Tensor& gout = t.g(out);
        Tensor& gx = t.g(x);
        const std::size_t m = sv.shape[0], n = sv.shape[1];
        for (std::size_t i = 0; i < m; ++i) {
            const double inner = kernels::dot(gout.row(i), sv.row(i), n);
            const double* sr = sv.row(i);
            const double* gr = gout.row(i);
            double* gxr = gx.row(i);
            for (std::size_t j = 0; j < n; ++j)
                gxr[j] += sr[j] * (gr[j] - inner);
        }
    });
}

Tape::Var Tape::layer_norm_rows(Var x, Var gain, Var bias, double eps) {
    Tensor y = ggpp::layer_norm_rows(val(x), val(gain), val(bias), eps);
    Var out{nodes_.size()};
    return push(std::move(y), [x, gain, bias, eps, out](Tape& t) {
        const Tensor& xv = t.val(x);
        const Tensor& gv = t.val(gain);
        const Tensor& gout = t.g(out);
        Tensor& gx = t.g(x);
        Tensor& gg = t.g(gain);
        Tensor& gb = t.g(bias);
        const std::size_t m = xv.shape[0], n = xv.shape[1];
        const double dn = static_cast<double>(n);
        for (std::size_t i = 0; i < m; ++i) {
            const double* xr = xv.row(i);
            const double* gr = gout.row(i);
            const double mean = kernels::sum(xr, n) / dn;
            double var = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double d = xr[j] - mean;
                var += d * d;
            }
            var /= dn;
            const double inv = 1.0 / std::sqrt(var + eps);
            // xhat_j = (x_j - mean) * inv; y_j = xhat_j * gain_j + bias_j
            double sum_gh = 0.0;   // sum over j of g_j * gain_j
            double sum_ghx = 0.0;  // sum over j of g_j * gain_j * xhat_j
            for (std::size_t j = 0; j < n; ++j) {
                const double xhat = (xr[j] - mean) * inv;
                const double gh = gr[j] * gv.data[j];
                sum_gh += gh;
                sum_ghx += gh * xhat;
                gg.data[j] += gr[j] * xhat;
                gb.data[j] += gr[j];
            }
            double* gxr = gx.row(i);
            for (std::size_t j = 0; j < n; ++j) {
                const double xhat = (xr[j] - mean) * inv;
                const double gh = gr[j] * gv.data[j];
                gxr[j] += inv * (gh - sum_gh / dn - xhat * sum_ghx / dn);
            }
        }
    });
}

Tape::Var Tape::gelu(Var x) {
    Tensor y = ggpp::gelu(val(x));
    Var out{nodes_.size()};
    return push(std::move(y), [x, out](Tape& t) {
        const Tensor& xv = t.val(x);
        const Tensor& gout = t.g(out);
        Tensor& gx = t.g(x);
        for (std::size_t i = 0; i < xv.size(); ++i)
            gx.data[i] += gout.data[i] * gelu_grad_scalar(xv.data[i]);
    });
}

Tape::Var Tape::mean_rows(Var x) {
    Tensor y = ggpp::mean_rows(val(x));
    Var out{nodes_.size()};
    return push(std::move(y), [x, out](Tape& t) {
        const Tensor& xv = t.val(x);
        const Tensor& gout = t.g(out);
        Tensor& gx = t.g(x);
        const std::size_t m = xv.shape[0], n = xv.shape[1];
        const double inv = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i)
            kernels::axpy(inv, gout.data.data(), gx.row(i), n);
    });
}

Tape::Var Tape::mse(Var a, Var b) {
    Tensor y{{1}, {ggpp::mse(val(a), val(b))}};
    Var out{nodes_.size()};
    return push(std::move(y), [a, b, out](Tape& t) {
        const double gs = t.g(out).data[0];
        const Tensor& av = t.val(a);
        const Tensor& bv = t.val(b);
        Tensor& ga = t.g(a);
        Tensor& gb = t.g(b);
        const double c = 2.0 * gs / static_cast<double>(av.size());
        for (std::size_t i = 0; i < av.size(); ++i) {
            const double d = c * (av.data[i] - bv.data[i]);
            ga.data[i] += d;
            gb.data[i] -= d;
        }
    });
}

Tape::Var Tape::cosine(Var a, Var b) {
    Tensor y{{1}, {ggpp::cosine(val(a), val(b))}};
    Var out{nodes_.size()};
    return push(std::move(y), [a, b, out](Tape& t) {
        const double gs = t.g(out).data[0];
        const Tensor& av = t.val(a);
        const Tensor& bv = t.val(b);
        const double na = norm2(av);
        const double nb = norm2(bv);
        const double c = t.val(out).data[0];
        Tensor& ga = t.g(a);
        Tensor& gb = t.g(b);
        for (std::size_t i = 0; i < av.size(); ++i) {
            ga.data[i] += gs * (bv.data[i] / (na * nb) - c * av.data[i] / (na * na));
            gb.data[i] += gs * (av.data[i] / (na * nb) - c * bv.data[i] / (nb * nb));
        }
    });
}

Tape::Var Tape::sigmoid(Var x) {
    Tensor y = val(x);
    for (double& v : y.data) v = ggpp::sigmoid(v);
    Var out{nodes_.size()};
    return push(std::move(y), [x, out](Tape& t) {
        const Tensor& sv = t.val(out);
        const Tensor& gout = t.g(out);
        Tensor& gx = t.g(x);
        for (std::size_t i = 0; i < sv.size(); ++i)
            gx.data[i] += gout.data[i] * sv.data[i] * (1.0 - sv.data[i]);
    });
}

Tape::Var Tape::add_first_rows(Var x, Var table) {
    const Tensor& xv = val(x);
    const Tensor& tv = val(table);
    if (xv.shape.size() != 2 || tv.shape.size() != 2 || xv.shape[1] != tv.shape[1] ||
        xv.shape[0] > tv.shape[0])
        throw DimensionError("add_first_rows: incompatible shapes");
    Tensor y = xv;
    const std::size_t m = xv.shape[0], n = xv.shape[1];
    for (std::size_t i = 0; i < m; ++i)
        kernels::axpy(1.0, tv.row(i), y.row(i), n);
    Var out{nodes_.size()};
    return push(std::move(y), [x, table, out](Tape& t) {
        const Tensor& gout = t.g(out);
        Tensor& gx = t.g(x);
        Tensor& gt = t.g(table);
        const std::size_t m = gout.shape[0], n = gout.shape[1];
        for (std::size_t i = 0; i < m; ++i) {
            kernels::axpy(1.0, gout.row(i), gx.row(i), n);
            kernels::axpy(1.0, gout.row(i), gt.row(i), n);
        }
    });
}

Tape::Var Tape::concat_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw ContractError("concat_rows: no rows");
    const std::size_t n = val(rows.front()).size();
    Tensor y = Tensor::zeros({rows.size(), n});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Tensor& r = val(rows[i]);
        if (r.size() != n) throw DimensionError("concat_rows: row length mismatch");
        kernels::axpy(1.0, r.data.data(), y.row(i), n);
    }
    Var out{nodes_.size()};
    return push(std::move(y), [rows, out](Tape& t) {
        const Tensor& gout = t.g(out);
        const std::size_t n = gout.shape[1];
        for (std::size_t i = 0; i < rows.size(); ++i)
            kernels::axpy(1.0, gout.row(i), t.g(rows[i]).data.data(), n);
    });
}

Tape::Var Tape::normalize_rows(Var x) {
    const Tensor& xv = val(x);
    if (xv.shape.size() != 2) throw DimensionError("normalize_rows: matrix expected");
    Tensor y = xv;
    const std::size_t m = xv.shape[0], n = xv.shape[1];
    for (std::size_t i = 0; i < m; ++i) {
        const double nrm = std::sqrt(kernels::dot(xv.row(i), xv.row(i), n));
        if (nrm == 0.0) throw DegenerateVectorError("normalize_rows: zero row");
        double* yr = y.row(i);
        for (std::size_t j = 0; j < n; ++j) yr[j] /= nrm;
    }
    Var out{nodes_.size()};
    return push(std::move(y), [x, out](Tape& t) {
        const Tensor& xv = t.val(x);
        const Tensor& yv = t.val(out);
        const Tensor& gout = t.g(out);
        Tensor& gx = t.g(x);
        const std::size_t m = xv.shape[0], n = xv.shape[1];
        for (std::size_t i = 0; i < m; ++i) {
            const double nrm = std::sqrt(kernels::dot(xv.row(i), xv.row(i), n));
            const double inner = kernels::dot(gout.row(i), yv.row(i), n);
            const double* yr = yv.row(i);
            const double* gr = gout.row(i);
            double* gxr = gx.row(i);
            for (std::size_t j = 0; j < n; ++j)
                gxr[j] += (gr[j] - yr[j] * inner) / nrm;
        }
    });
}

Tape::Var Tape::cross_entropy(Var logits, const std::vector<std::size_t>& targets) {
    const Tensor& lv = val(logits);
    if (lv.shape.size() != 2 || lv.shape[0] != targets.size())
        throw DimensionError("cross_entropy: one target per row expected");
    Tensor probs = ggpp::softmax_rows(lv);
    const std::size_t m = lv.shape[0];
    double loss = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        loss -= std::log(probs.at(i, targets[i]));
    loss /= static_cast<double>(m);
    Var out{nodes_.size()};
    return push(Tensor{{1}, {loss}},
                [logits, targets, probs = std::move(probs), out](Tape& t) {
        const double gs = t.g(out).data[0];
        Tensor& gl = t.g(logits);
        const std::size_t m = probs.shape[0], n = probs.shape[1];
        const double c = gs / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            kernels::axpy(c, probs.row(i), gl.row(i), n);
            gl.at(i, targets[i]) -= c;
        }
    });
}

void Tape::backward(Var loss) {
    if (val(loss).size() != 1)
        throw ContractError("backward: loss must be a scalar node");
    for (auto& node : nodes_)
        node.grad = Tensor::zeros(node.value.shape);
    nodes_[loss.id].grad.data[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        if (nodes_[i].back) nodes_[i].back(*this);
    }
}

} // namespace ggpp
