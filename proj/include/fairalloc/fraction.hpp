#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fairalloc {

// Exact rational with a positive, reduced denominator. Used for masses and
// outcome frequencies ingested from counts, so that frequency-derived
// statistics reproduce integer counting exactly.
struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Fraction() = default;
    Fraction(std::int64_t n, std::int64_t d) : num(n), den(d) { normalize(); }

    static Fraction from_int(std::int64_t n) { return Fraction(n, 1); }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    friend Fraction operator+(const Fraction& a, const Fraction& b) {
        return make(i128(a.num) * b.den + i128(b.num) * a.den, i128(a.den) * b.den);
    }
    friend Fraction operator-(const Fraction& a, const Fraction& b) {
        return make(i128(a.num) * b.den - i128(b.num) * a.den, i128(a.den) * b.den);
    }
    friend Fraction operator*(const Fraction& a, const Fraction& b) {
        return make(i128(a.num) * b.num, i128(a.den) * b.den);
    }
    friend Fraction operator/(const Fraction& a, const Fraction& b) {
        if (b.num == 0) throw std::domain_error("Fraction: division by zero");
        return make(i128(a.num) * b.den, i128(a.den) * b.num);
    }

    friend bool operator==(const Fraction& a, const Fraction& b) {
        return a.num == b.num && a.den == b.den;
    }
    friend bool operator<(const Fraction& a, const Fraction& b) {
        return i128(a.num) * b.den < i128(b.num) * a.den;
    }

    std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }

private:
    using i128 = __int128;

    void normalize() {
        if (den == 0) throw std::domain_error("Fraction: zero denominator");
        if (den < 0) { num = -num; den = -den; }
        const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) { num /= g; den /= g; }
    }

    static Fraction make(i128 n, i128 d) {
        if (d == 0) throw std::domain_error("Fraction: zero denominator");
        if (d < 0) { n = -n; d = -d; }
        const i128 g = gcd128(n < 0 ? -n : n, d);
        if (g > 1) { n /= g; d /= g; }
        constexpr i128 lim = INT64_MAX;
        if (n > lim || n < -lim || d > lim)
            throw std::overflow_error("Fraction: 64-bit overflow");
        Fraction f;
        f.num = static_cast<std::int64_t>(n);
        f.den = static_cast<std::int64_t>(d);
        return f;
    }

    static i128 gcd128(i128 a, i128 b) {
        while (b != 0) { const i128 t = a % b; a = b; b = t; }
        return a < 0 ? -a : a;
    }
};

}  // namespace fairalloc
