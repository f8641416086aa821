#pragma once

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "analytics.hpp"
#include "config.hpp"

namespace bri2d
{
/*!
 * Tabulated analytics operation: named real inputs and outputs.
 */
struct TableOp
{
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::function<std::vector<double>(std::vector<double> const&)> eval;
};

inline std::map<std::string, TableOp> const& table_ops()
{
    static std::map<std::string, TableOp> const ops = [] {
        std::map<std::string, TableOp> m;
        m["poisson_kernel"] = {{"x_re", "x_im", "theta"}, {"density"}, [](auto const& v) {
                                   return std::vector<double>{poisson_kernel(
                                       Point{v[0], v[1]}, std::polar(1.0, v[2]))};
                               }};
        m["ell"] = {{"x_re", "x_im"}, {"ell", "ell_tilde"}, [](auto const& v) {
                        auto e = ell(Point{v[0], v[1]});
                        return std::vector<double>{e.value, e.tilde};
                    }};
        m["caphat_disk"] = {{"y_re", "y_im", "r"},
                            {"leading_term", "error_bound", "collocation"},
                            [](auto const& v) {
                                Point y{v[0], v[1]};
                                auto lead = caphat_disk(y, v[2]);
                                auto col = caphat_disk(y, v[2], CapacityMethod::collocation);
                                return std::vector<double>{lead.leading_term,
                                                           lead.error_bound, col.value};
                            }};
        m["caphat_leading_log"] = {{"y_norm", "log_inv_r"},
                                   {"leading_term", "error_bound"},
                                   [](auto const& v) {
                                       auto c = caphat_leading_log(
                                           v[0], v[1], ell(Point{v[0], 0}).value);
                                       return std::vector<double>{c.leading_term,
                                                                  c.error_bound};
                                   }};
        m["hitting_prob"] = {{"s", "a", "b"}, {"probability"}, [](auto const& v) {
                                 return std::vector<double>{hitting_prob(v[0], v[1], v[2])};
                             }};
        m["escape_prob"] = {{"s", "a"}, {"probability"}, [](auto const& v) {
                                return std::vector<double>{escape_prob(v[0], v[1])};
                            }};
        m["cond_hit_small_disk"] = {
            {"x_re", "x_im", "y_re", "y_im", "r"},
            {"hit", "escape", "hit_error_bound", "escape_error_bound"},
            [](auto const& v) {
                auto c = cond_hit_small_disk(Point{v[0], v[1]}, Point{v[2], v[3]}, v[4]);
                return std::vector<double>{c.hit, c.escape, c.hit_error_bound,
                                           c.escape_error_bound};
            }};
        m["L_value"] = {{"x_re", "x_im", "y_re", "y_im"}, {"L"}, [](auto const& v) {
                            return std::vector<double>{
                                L_value(Point{v[0], v[1]}, Point{v[2], v[3]})};
                        }};
        m["psi_terms"] = {{"h", "x_norm", "alpha"},
                          {"ell", "psi1", "psi2", "psi3", "sum"},
                          [](auto const& v) {
                              double l = ell(Point{v[1], 0}).value;
                              auto p = psi_terms(v[0], v[1], v[2], l);
                              return std::vector<double>{l, p.psi1, p.psi2, p.psi3,
                                                         p.sum()};
                          }};
        m["r_b"] = {{"alpha", "x_norm", "b"}, {"r_b"}, [](auto const& v) {
                        return std::vector<double>{r_b(v[0], v[1], v[2])};
                    }};
        m["vacancy_prob"] = {{"alpha", "caphat"}, {"probability"}, [](auto const& v) {
                                 return std::vector<double>{vacancy_prob(v[0], v[1])};
                             }};
        return m;
    }();
    return ops;
}

inline std::string format17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/*!
 * Write an operation over the Cartesian product of the grid's input lists
 * as CSV. The grid maps each input name to a comma-separated list; the
 * last input varies fastest.
 */
inline void emit_table(std::string const& op_name, KeyValues const& grid,
                       std::ostream& os)
{
    auto const& ops = table_ops();
    auto it = ops.find(op_name);
    if (it == ops.end())
    {
        throw std::invalid_argument("table: unknown operation " + op_name);
    }
    auto const& op = it->second;
    std::vector<std::vector<double>> axes;
    for (auto const& name : op.inputs)
    {
        axes.push_back(grid.list(name));
    }
    for (auto const& [k, v] : grid.values())
    {
        if (std::find(op.inputs.begin(), op.inputs.end(), k) == op.inputs.end())
        {
            throw std::invalid_argument("table: " + op_name
                                        + " takes no input named " + k);
        }
    }
    std::string header;
    for (auto const& n : op.inputs)
    {
        header += (header.empty() ? "" : ",") + n;
    }
    for (auto const& n : op.outputs)
    {
        header += "," + n;
    }
    os << header << '\n';
    std::vector<std::size_t> idx(axes.size(), 0);
    for (;;)
    {
        std::vector<double> in(axes.size());
        for (std::size_t k = 0; k < axes.size(); ++k)
        {
            in[k] = axes[k][idx[k]];
        }
        auto out = op.eval(in);
        std::string row;
        for (double v : in)
        {
            row += (row.empty() ? "" : ",") + format17(v);
        }
        for (double v : out)
        {
            row += "," + format17(v);
        }
        os << row << '\n';
        std::size_t k = axes.size();
        while (k > 0)
        {
            --k;
            if (++idx[k] < axes[k].size())
            {
                break;
            }
            idx[k] = 0;
            if (k == 0)
            {
                return;
            }
        }
        if (axes.empty())
        {
            return;
        }
    }
}

}  // namespace bri2d
