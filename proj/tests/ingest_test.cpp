#include "test_util.hpp"

#include <photofuse/bundler.hpp>
#include <photofuse/config.hpp>
#include <photofuse/image_io.hpp>
#include <photofuse/ply.hpp>
#include <photofuse/text_io.hpp>

#include <gtest/gtest.h>

#include <png.h>

using namespace photofuse;
using photofuse::test::random_cloud;

TEST(Ply, MinimalAsciiWithColors) {
    const std::string text =
        "ply\nformat ascii 1.0\ncomment tiny\nelement vertex 3\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n"
        "0 0 0 255 0 0\n1 0 0 0 255 0\n0 1 0 0 0 51\n";
    const auto g = parse_ply(text);
    const auto& c = std::get<PointCloud>(g);
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c.points[1], Point3(1, 0, 0));
    ASSERT_TRUE(c.colors);
    EXPECT_EQ((*c.colors)[0], Rgb(1, 0, 0));
    EXPECT_DOUBLE_EQ((*c.colors)[2][2], 0.2);
    EXPECT_FALSE(c.normals);
}

TEST(Ply, RoundTripIsBitExactInBothEncodings) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        auto c = random_cloud(rng, 50, -1e3, 1e3);
        c.colors.emplace();
        std::uniform_int_distribution<int> b(0, 255);
        for (std::size_t i = 0; i < c.size(); ++i) {
            c.colors->push_back(Rgb(b(rng), b(rng), b(rng)) / 255.0);
        }
        for (auto enc : {PlyEncoding::ascii, PlyEncoding::binary_little_endian}) {
            const auto back = std::get<PointCloud>(parse_ply(write_ply(c, enc)));
            EXPECT_EQ(back.points, c.points);
            for (std::size_t i = 0; i < c.size(); ++i) {
                EXPECT_LE(((*back.colors)[i] - (*c.colors)[i]).cwiseAbs().maxCoeff(), 1.0 / 255.0);
            }
        }
    }
}

TEST(Ply, AsciiAndBinaryEncodingsAgree) {
    std::mt19937_64 rng(2);
    auto c = random_cloud(rng, 100);
    c.normals.emplace();
    for (const auto& p : c.points) c.normals->push_back(p.normalized());
    const TriangleMesh m{c, {{0, 1, 2}, {2, 3, 4}}};
    const auto a = std::get<TriangleMesh>(parse_ply(write_ply(m, PlyEncoding::ascii)));
    const auto b = std::get<TriangleMesh>(parse_ply(write_ply(m, PlyEncoding::binary_little_endian)));
    EXPECT_EQ(a.vertices.points, b.vertices.points);
    EXPECT_EQ(*a.vertices.normals, *b.vertices.normals);
    EXPECT_EQ(a.faces, b.faces);
    EXPECT_EQ(a.faces, m.faces);
}

TEST(Ply, WriterIsDeterministicAndHandlesEmpty) {
    std::mt19937_64 rng(3);
    const auto c = random_cloud(rng, 10);
    EXPECT_EQ(write_ply(c), write_ply(c));
    const auto empty = write_ply(PointCloud{}, PlyEncoding::ascii);
    EXPECT_NE(empty.find("element vertex 0\n"), std::string::npos);
    EXPECT_TRUE(std::get<PointCloud>(parse_ply(empty)).empty());

    const TriangleMesh one{random_cloud(rng, 3), {{0, 1, 2}}};
    EXPECT_NE(write_ply(one, PlyEncoding::ascii).find("element face 1\n"), std::string::npos);
}

TEST(Ply, ReadsFloatAndQuadFaces) {
    const std::string text =
        "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n"
        "property float confidence\nelement face 1\nproperty list uchar int vertex_index\nend_header\n"
        "0 0 0 1\n1 0 0 1\n1 1 0 1\n0 1 0 1\n4 0 1 2 3\n";
    const auto m = std::get<TriangleMesh>(parse_ply(text));
    ASSERT_EQ(m.faces.size(), 2u);
    EXPECT_EQ(m.faces[1], (Face{0, 2, 3}));
}

TEST(Ply, ErrorsCarryLineNumbers) {
    const std::string bad_header = "ply\nformat ascii 1.0\nelement vertex 1\nproperty flot x\nend_header\n0\n";
    try {
        parse_ply(bad_header);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 4u);
    }
    const std::string truncated =
        "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n"
        "0 0 0\n1 1 1\n";
    EXPECT_THROW(parse_ply(truncated), ParseError);
    const std::string bin_trunc =
        "ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty double x\nproperty double y\n"
        "property double z\nend_header\nabc";
    EXPECT_THROW(parse_ply(bin_trunc), ParseError);
    EXPECT_THROW(parse_ply("ply\nformat binary_big_endian 1.0\nend_header\n"), ParseError);
    EXPECT_THROW(parse_ply("not a ply"), ParseError);
    EXPECT_THROW(parse_ply(""), ParseError);
}

TEST(Ply, ParserIsTotalOnGarbage) {
    // Every prefix and every single-byte corruption either parses or raises a structured error.
    std::mt19937_64 rng(4);
    auto c = random_cloud(rng, 5);
    c.colors.emplace(5, Rgb(0.2, 0.4, 0.6));
    const TriangleMesh m{c, {{0, 1, 2}}};
    for (auto enc : {PlyEncoding::ascii, PlyEncoding::binary_little_endian}) {
        const auto bytes = write_ply(m, enc);
        for (std::size_t n = 0; n < bytes.size(); ++n) {
            try {
                parse_ply(std::string_view(bytes).substr(0, n));
            } catch (const Error&) {
            }
            auto mutated = bytes;
            mutated[n] = static_cast<char>(rng());
            try {
                parse_ply(mutated);
            } catch (const Error&) {
            }
        }
    }
}

namespace {

const char* kBundle =
    "# Bundle file v0.3\n"
    "2 1\n"
    "500 -0.01 0.002\n"
    "1 0 0\n0 1 0\n0 0 1\n"
    "0.5 -0.25 -4\n"
    "0 0 0\n"
    "1 0 0\n0 1 0\n0 0 1\n"
    "0 0 0\n"
    "0.1 0.2 -0.3\n"
    "255 128 0\n"
    "1 0 7 12.5 -3.25\n";

} // namespace

TEST(Bundler, HandcraftedFileParsesToLiterals) {
    const auto rec = parse_bundler(kBundle, {{640, 480}});
    ASSERT_EQ(rec.raw_cameras.size(), 2u);
    EXPECT_EQ(rec.raw_cameras[0].focal, 500);
    EXPECT_EQ(rec.raw_cameras[0].k1, -0.01);
    EXPECT_EQ(rec.raw_cameras[0].k2, 0.002);
    EXPECT_EQ(rec.raw_cameras[0].translation, Vec3(0.5, -0.25, -4));
    EXPECT_EQ(rec.raw_cameras[0].rotation, Mat3::Identity());
    ASSERT_TRUE(rec.cameras[0]);
    EXPECT_FALSE(rec.cameras[1]);  // zero focal: kept, flagged unusable
    EXPECT_EQ(rec.sparse_points.points[0], Point3(0.1, 0.2, -0.3));
    EXPECT_EQ((*rec.sparse_points.colors)[0], Rgb(1.0, 128 / 255.0, 0));
    ASSERT_EQ(rec.views[0].size(), 1u);
    EXPECT_EQ(rec.views[0][0].camera, 0u);
    EXPECT_EQ(rec.views[0][0].key, 7u);
    EXPECT_EQ(rec.views[0][0].x, 12.5);
    EXPECT_EQ(rec.views[0][0].y, -3.25);

    const auto back = to_bundler(*rec.cameras[0]);
    EXPECT_LT(test::max_abs_diff(back.rotation, rec.raw_cameras[0].rotation), 1e-9);
    EXPECT_LT((back.translation - rec.raw_cameras[0].translation).norm(), 1e-9);
    EXPECT_EQ(back.focal, 500);
    EXPECT_EQ(rec.cameras[0]->cx, 319.5);
    EXPECT_EQ(rec.cameras[0]->cy, 239.5);
}

TEST(Bundler, OnAxisPointProjectsToImageCenter) {
    BundlerCamera b;
    b.focal = 800;
    b.rotation = photofuse::axis_angle(Vec3(0.3, 1, 0.2), 0.7);
    b.translation = Vec3(0.1, 0.2, 0.3);
    const Camera cam = from_bundler(b, {1000, 600});
    // Bundler looks down -z: the point at camera-space (0,0,-d).
    const double d = 5.0;
    const Point3 world = b.rotation.transpose() * (Vec3(0, 0, -d) - b.translation);
    const auto pr = project_point(cam, world);
    ASSERT_TRUE(pr);
    EXPECT_NEAR(pr->u, cam.cx, 1e-9);
    EXPECT_NEAR(pr->v, cam.cy, 1e-9);
    EXPECT_NEAR(pr->depth, d, 1e-9);
}

TEST(Bundler, ReprojectionOfGeneratedFileMatchesViews) {
    // Generate a scene with the Bundler projection formula itself, write it, parse it,
    // and reproject with the converted cameras.
    std::mt19937_64 rng(5);
    std::vector<BundlerCamera> cams;
    for (int i = 0; i < 3; ++i) {
        BundlerCamera b;
        b.focal = 700 + 50 * i;
        b.k1 = 0.02 * (i - 1);
        b.k2 = 0.001 * i;
        b.rotation = test::random_rotation(rng, 0.3);
        b.translation = Vec3(0.1 * i, -0.2, -6.0);
        cams.push_back(b);
    }
    PointCloud pts;
    pts.colors.emplace();
    std::vector<std::vector<BundlerView>> views;
    for (int i = 0; i < 200; ++i) {
        const Point3 x = test::random_point(rng);
        pts.points.push_back(x);
        pts.colors->push_back(Rgb(0.5, 0.5, 0.5));
        std::vector<BundlerView> vs;
        for (std::uint32_t c = 0; c < cams.size(); ++c) {
            const Vec3 P = cams[c].rotation * x + cams[c].translation;
            const double px = -P.x() / P.z(), py = -P.y() / P.z();
            const double r2 = px * px + py * py;
            const double f = cams[c].focal * (1 + cams[c].k1 * r2 + cams[c].k2 * r2 * r2);
            vs.push_back({c, static_cast<std::uint32_t>(i), f * px, f * py});
        }
        views.push_back(vs);
    }
    const auto rec = parse_bundler(write_bundler(cams, pts, views), {{800, 600}});
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < rec.views.size(); ++i) {
        for (const auto& v : rec.views[i]) {
            const auto& cam = *rec.cameras[v.camera];
            const auto pr = project_point(cam, rec.sparse_points.points[i]);
            ASSERT_TRUE(pr);
            const auto [u, w] = bundler_to_pixel(cam, v.x, v.y);
            total += std::hypot(pr->u - u, pr->v - w);
            ++n;
        }
    }
    EXPECT_LT(total / static_cast<double>(n), 1.0);
    EXPECT_LT(total / static_cast<double>(n), 1e-9);
    for (std::size_t c = 0; c < cams.size(); ++c) {
        const auto back = to_bundler(*rec.cameras[c]);
        EXPECT_LT(test::max_abs_diff(back.rotation, cams[c].rotation), 1e-9);
        EXPECT_LT((back.translation - cams[c].translation).norm(), 1e-9);
    }
}

TEST(Bundler, ErrorPaths) {
    EXPECT_THROW(parse_bundler("# Bundle file v0.2\n1 0\n", {{10, 10}}), InputError);
    EXPECT_THROW(parse_bundler("hello\n", {{10, 10}}), ParseError);
    EXPECT_THROW(parse_bundler("# Bundle file v0.3\n0 0\n", {{10, 10}}), ParseError);
    EXPECT_THROW(parse_bundler("# Bundle file v0.3\n1 0\n500 0 0\n1 0 0\n", {{10, 10}}), ParseError);
    const std::string bad_view = std::string(kBundle).replace(std::string(kBundle).rfind("1 0 7"), 5, "1 9 7");
    EXPECT_THROW(parse_bundler(bad_view, {{10, 10}}), ParseError);
    try {
        parse_bundler("# Bundle file v0.4\n", {{10, 10}});
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("unsupported version"), std::string::npos);
    }
}

TEST(Correspondences, ParseCommentsAndRoundTrip) {
    const auto pairs = parse_correspondences("# header\n0 0 0 1 1 1\n\n1 2 3 4 5 6 # trailing\n7 8 9 10 11 12\n");
    ASSERT_EQ(pairs.size(), 3u);
    EXPECT_EQ(pairs[1].first, Point3(1, 2, 3));
    EXPECT_EQ(pairs[1].second, Point3(4, 5, 6));

    std::mt19937_64 rng(6);
    std::vector<PointPair> many;
    for (int i = 0; i < 30; ++i) many.emplace_back(test::random_point(rng), test::random_point(rng, -1e5, 1e5));
    const auto back = parse_correspondences(write_correspondences(many));
    EXPECT_EQ(back, many);
}

TEST(Correspondences, MalformedRowReportsRow) {
    try {
        parse_correspondences("0 0 0 1 1 1\n1 2 3 4 5\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    EXPECT_THROW(parse_correspondences("0 0 0 1 1 x\n"), ParseError);
}

TEST(TransformFile, RoundTrip) {
    std::mt19937_64 rng(7);
    const auto t = test::random_similarity(rng);
    const auto back = parse_transform(write_transform(t));
    EXPECT_EQ(back.scale(), t.scale());
    EXPECT_EQ(back.rotation(), t.rotation());
    EXPECT_EQ(back.translation(), t.translation());
    EXPECT_THROW(parse_transform("1 2 3"), InputError);
}

TEST(Images, KnownPpmBytes) {
    std::string ppm = "P6\n2 2\n255\n";
    const unsigned char px[12] = {255, 0, 0, 0, 255, 0, 0, 0, 255, 51, 102, 153};
    ppm.append(reinterpret_cast<const char*>(px), 12);
    const auto img = decode_image(ppm);
    ASSERT_EQ(img.width(), 2);
    ASSERT_EQ(img.height(), 2);
    EXPECT_EQ(img(0, 0), Rgb(1, 0, 0));
    EXPECT_EQ(img(1, 0), Rgb(0, 1, 0));
    EXPECT_EQ(img(0, 1), Rgb(0, 0, 1));
    EXPECT_DOUBLE_EQ(img(1, 1)[0], 0.2);
    EXPECT_DOUBLE_EQ(img(1, 1)[2], 0.6);
    EXPECT_EQ(encode_ppm(img), ppm);
}

TEST(Images, PpmAndPngRoundTripsAreLossless) {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> b(0, 255);
    Image img(7, 5);
    for (auto& c : img.data()) c = Rgb(b(rng), b(rng), b(rng)) / 255.0;
    EXPECT_EQ(decode_image(encode_ppm(img)), img);
    EXPECT_EQ(decode_image(encode_png(img)), img);
}

TEST(Images, SixteenBitPngKeepsFullPrecision) {
    // Fixed-point oracle: sample v decodes to exactly v / 65535.
    Grid<double> g(3, 1);
    g(0, 0) = 0.0;
    g(1, 0) = 12345.0 / 65535.0;
    g(2, 0) = 1.0;
    const auto img = decode_image(encode_png_gray16(g));
    EXPECT_EQ(img(0, 0), Rgb::Zero());
    EXPECT_DOUBLE_EQ(img(1, 0)[0], 12345.0 / 65535.0);
    EXPECT_DOUBLE_EQ(img(1, 0)[2], 12345.0 / 65535.0);
    EXPECT_EQ(img(2, 0), Rgb::Ones());
}

TEST(Images, UnsupportedFormatIsNamed) {
    try {
        decode_image(std::string("\xff\xd8\xff\xe0 jfif", 9));
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("JPEG"), std::string::npos);
    }
    EXPECT_THROW(decode_image("P6\n2 2\n255\nab"), InputError);
    const std::string png = encode_png(Image(4, 4));
    EXPECT_THROW(decode_image(png.substr(0, png.size() / 2)), InputError);
}

TEST(Config, DefaultsOverridesAndValidation) {
    const auto c = parse_config(R"({"block_size": 9, "coarse": "corr", "visibility_eps": 0.01})");
    EXPECT_EQ(c.block_size, 9);
    EXPECT_EQ(c.search_radius, 15);
    EXPECT_EQ(c.best_k, 3);
    EXPECT_EQ(c.coarse, CoarseMode::correspondences);
    EXPECT_EQ(*c.visibility_eps, 0.01);
    EXPECT_THROW(parse_config(R"({"block_size": 8})"), InputError);
    EXPECT_THROW(parse_config(R"({"block_size": 1})"), InputError);
    EXPECT_THROW(parse_config(R"({"search_radius": 0})"), InputError);
    EXPECT_THROW(parse_config(R"({"best_k": 0})"), InputError);
    EXPECT_THROW(parse_config(R"({"no_such_key": 0})"), InputError);
    EXPECT_THROW(parse_config(R"({"block_size": "seven"})"), InputError);
    EXPECT_THROW(parse_config("{"), InputError);

    RunConfig round;
    merge_json(round, to_json(c));
    EXPECT_EQ(to_json(round), to_json(c));
}
