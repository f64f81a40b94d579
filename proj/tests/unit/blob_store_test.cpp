// Copyright 2026 The Gauntlet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gauntlet/blob_store.hpp"

#include <gtest/gtest.h>

#include "gauntlet/error.hpp"
#include "support.hpp"

namespace gauntlet {
namespace {

TEST(BlobStoreTest, PutGetListRemove) {
  testing::TempDir dir;
  BlobStore store(dir.path());
  store.put("challenges/c1/bundle/eval.py", "print(1)", BlobKind::kBundle);
  store.put("challenges/c1/bundle/annotations/test.json", "[1,2]", BlobKind::kAnnotation);
  store.put("submissions/s1/artifact", "[1,2]", BlobKind::kArtifact);
  EXPECT_EQ(store.get("challenges/c1/bundle/eval.py"), "print(1)");
  EXPECT_EQ(store.kind_of("challenges/c1/bundle/annotations/test.json"), BlobKind::kAnnotation);
  EXPECT_EQ(store.list("challenges/c1/").size(), 2u);
  store.remove("submissions/s1/artifact");
  EXPECT_FALSE(store.exists("submissions/s1/artifact"));
  try {
    store.get("submissions/s1/artifact");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotFound);
  }
}

TEST(BlobStoreTest, IndexSurvivesReopen) {
  testing::TempDir dir;
  {
    BlobStore store(dir.path());
    store.put("a/b", "hello", BlobKind::kLog);
  }
  BlobStore again(dir.path());
  EXPECT_EQ(again.get("a/b"), "hello");
  EXPECT_EQ(again.kind_of("a/b"), BlobKind::kLog);
}

TEST(BlobStoreTest, RejectsUnsafeKeys) {
  testing::TempDir dir;
  BlobStore store(dir.path());
  EXPECT_THROW(store.put("../outside", "x", BlobKind::kOther), Error);
  EXPECT_THROW(store.put("/abs", "x", BlobKind::kOther), Error);
}

}  // namespace
}  // namespace gauntlet
