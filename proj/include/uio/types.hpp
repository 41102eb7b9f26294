#pragma once

#include "uio/numeric.hpp"

#include <optional>
#include <stdexcept>
#include <string>

namespace uio {

struct MissingBounds : std::runtime_error {
    explicit MissingBounds(const std::string& what) : std::runtime_error(what) {}
};

// Component-wise bounds on the unknown input, stored as min/max with the
// offset/symmetric-part decomposition available on demand.
struct InputBounds {
    VectorXd u_min;
    VectorXd u_max;

    void validate() const
    {
        if (u_min.size() != u_max.size())
            throw std::invalid_argument("InputBounds: u_min and u_max sizes differ");
        for (Eigen::Index i = 0; i < u_min.size(); ++i)
            if (u_min(i) > u_max(i))
                throw std::invalid_argument("InputBounds: u_min > u_max at component " +
                                            std::to_string(i));
    }

    VectorXd offset() const { return 0.5 * (u_max + u_min); }
    VectorXd symmetric_part() const { return 0.5 * (u_max - u_min); }
};

// The plant quadruple x' = Ax + Bu, y = Cx + Du with optional input bounds.
struct StateSpaceSystem {
    MatrixXd A;
    MatrixXd B;
    MatrixXd C;
    MatrixXd D;
    std::optional<InputBounds> bounds;

    int n() const { return static_cast<int>(A.rows()); }
    int m() const { return static_cast<int>(B.cols()); }
    int p() const { return static_cast<int>(C.rows()); }

    // Dimensional consistency plus the standing rank assumptions:
    // [B; D] full column rank and [C D] full row rank.
    void validate(const RankPolicy& policy = {}) const
    {
        if (A.rows() != A.cols()) throw std::invalid_argument("StateSpaceSystem: A not square");
        if (B.rows() != A.rows()) throw std::invalid_argument("StateSpaceSystem: B row count");
        if (C.cols() != A.cols()) throw std::invalid_argument("StateSpaceSystem: C column count");
        if (D.rows() != C.rows() || D.cols() != B.cols())
            throw std::invalid_argument("StateSpaceSystem: D dimensions");
        if (m() > 0) {
            MatrixXd BD(n() + p(), m());
            BD << B, D;
            if (numeric_rank(BD, policy) != m())
                throw std::invalid_argument("StateSpaceSystem: [B; D] is not full column rank");
        }
        if (p() > 0) {
            MatrixXd CD(p(), n() + m());
            CD << C, D;
            if (numeric_rank(CD, policy) != p())
                throw std::invalid_argument("StateSpaceSystem: [C D] is not full row rank");
        }
        if (bounds) {
            bounds->validate();
            if (bounds->u_min.size() != m())
                throw std::invalid_argument("StateSpaceSystem: bounds size != m");
        }
    }
};

}  // namespace uio
