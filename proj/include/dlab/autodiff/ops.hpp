#pragma once

#include "dlab/autodiff/value.hpp"

namespace dlab::ad {

// Elementwise binary ops broadcast when shapes are equal, when one side has a
// single element, or when one side is a row vector ([C] or [1,C]) against [R,C].
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value div(const Value& a, const Value& b);

Value neg(const Value& a);
Value scale(const Value& a, double k);
Value add_scalar(const Value& a, double k);
Value square(const Value& a);
Value tanh(const Value& a);
Value exp(const Value& a);
Value log(const Value& a);
/// log(cosh(a)), evaluated without overflow for large |a|.
Value log_cosh(const Value& a);

/// [m,k] x [k,n] -> [m,n]
Value matmul(const Value& a, const Value& b);

/// Sum of all elements -> scalar.
Value sum(const Value& a);
Value mean(const Value& a);
/// Sum of squares of all elements -> scalar.
Value squared_norm(const Value& a);
/// Sum of elementwise products -> scalar. Shapes must match exactly.
Value dot(const Value& a, const Value& b);

/// Column-wise concatenation of two [R,*] matrices.
Value concat_cols(const Value& a, const Value& b);
/// Columns [begin, end) of a [R,C] matrix.
Value slice_cols(const Value& a, std::size_t begin, std::size_t end);

/// Forward identity; the backward sweep never passes through the result.
Value stop_gradient(const Value& a);

inline Value operator+(const Value& a, const Value& b) { return add(a, b); }
inline Value operator-(const Value& a, const Value& b) { return sub(a, b); }
inline Value operator*(const Value& a, const Value& b) { return mul(a, b); }
inline Value operator/(const Value& a, const Value& b) { return div(a, b); }
inline Value operator-(const Value& a) { return neg(a); }
inline Value operator*(const Value& a, double k) { return scale(a, k); }
inline Value operator*(double k, const Value& a) { return scale(a, k); }
inline Value operator+(const Value& a, double k) { return add_scalar(a, k); }

}  // namespace dlab::ad
