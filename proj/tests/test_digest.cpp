#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "metatune/digest.hpp"
#include "metatune/rng.hpp"

using namespace metatune;

// ============================================================================
// sha256_hex
// ============================================================================

TEST_CASE("sha256 of the empty string matches the published value") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("sha256 of 'abc' matches the published value") {
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("sha256 of the two-block NIST vector matches") {
    CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("sha256 output is always a 64-char lowercase hex digest") {
    const std::vector<std::string> inputs = {"", "a", "hello world", std::string(1000, 'x')};
    for (const std::string& input : inputs) {
        std::string d = sha256_hex(input);
        CHECK(d.size() == 64);
        CHECK(is_hex_digest(d));
    }
}

TEST_CASE("distinct inputs produce distinct digests") {
    std::set<std::string> seen;
    for (int i = 0; i < 200; ++i) {
        seen.insert(sha256_hex("input-" + std::to_string(i)));
    }
    CHECK(seen.size() == 200);
}

// ============================================================================
// is_hex_digest
// ============================================================================

TEST_CASE("is_hex_digest accepts exactly 64 lowercase hex chars") {
    CHECK(is_hex_digest(std::string(64, 'a')));
    CHECK(is_hex_digest(std::string(64, '0')));
    CHECK_FALSE(is_hex_digest(std::string(63, 'a')));
    CHECK_FALSE(is_hex_digest(std::string(65, 'a')));
    CHECK_FALSE(is_hex_digest(std::string(64, 'g')));
    CHECK_FALSE(is_hex_digest(std::string(64, 'A')));
    CHECK_FALSE(is_hex_digest(""));
    std::string with_space = std::string(63, 'a') + " ";
    CHECK_FALSE(is_hex_digest(with_space));
}

// ============================================================================
// SplitMix64
// ============================================================================

TEST_CASE("splitmix64 seed 0 emits the reference stream") {
    SplitMix64 rng(0);
    CHECK(rng.next() == 16294208416658607535ULL);
    CHECK(rng.next() == 7960286522194355700ULL);
    CHECK(rng.next() == 487617019471545679ULL);
}

TEST_CASE("splitmix64 seed 42 emits the reference stream") {
    SplitMix64 rng(42);
    CHECK(rng.next() == 13679457532755275413ULL);
    CHECK(rng.next() == 2949826092126892291ULL);
}

TEST_CASE("same seed gives the same stream, different seed a different one") {
    SplitMix64 a(777), b(777), c(778);
    bool all_equal = true;
    bool any_differs = false;
    for (int i = 0; i < 64; ++i) {
        uint64_t va = a.next();
        all_equal = all_equal && (va == b.next());
        any_differs = any_differs || (va != c.next());
    }
    CHECK(all_equal);
    CHECK(any_differs);
}

TEST_CASE("next_below stays inside its bound") {
    SplitMix64 rng(9);
    for (int i = 0; i < 1000; ++i) {
        CHECK(rng.next_below(7) < 7);
    }
    SplitMix64 one(9);
    for (int i = 0; i < 100; ++i) {
        CHECK(one.next_below(1) == 0);
    }
}

// ============================================================================
// seeded_shuffle
// ============================================================================

TEST_CASE("seeded_shuffle is deterministic and permutes") {
    std::vector<int> base(50);
    for (int i = 0; i < 50; ++i) base[i] = i;

    std::vector<int> a = base, b = base;
    seeded_shuffle(a, 42);
    seeded_shuffle(b, 42);
    CHECK(a == b);
    CHECK(a != base);

    std::vector<int> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == base);

    std::vector<int> c = base;
    seeded_shuffle(c, 43);
    CHECK(c != a);
}

TEST_CASE("seeded_shuffle handles empty and single-element vectors") {
    std::vector<int> empty;
    seeded_shuffle(empty, 1);
    CHECK(empty.empty());

    std::vector<int> one = {5};
    seeded_shuffle(one, 1);
    CHECK(one == std::vector<int>{5});
}
