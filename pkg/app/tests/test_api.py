import unittest

from fastapi.testclient import TestClient

from app.database import ensure_schema
from app.main import app
from app.schemas.codebook import CodebookFile, JointCodebookFile
from app.tests.helpers import random_joint

PREFIX = "/api/v1"


class ApiTestCase(unittest.TestCase):
    def setUp(self):
        ensure_schema()
        self.client = TestClient(app)
        joint = random_joint(T=3, K1=2, K2=2, power=10.0)
        self.joint = JointCodebookFile.from_joint(joint).model_dump(mode="json")
        self.base = CodebookFile.from_codebook(random_joint(T=3, K1=4, K2=1).user1).model_dump(mode="json")

    def assertEnvelope(self, response, status_code: int, success: bool = True) -> dict:
        self.assertEqual(response.status_code, status_code, response.text)
        body = response.json()
        self.assertEqual(body["success"], success)
        return body


class TestHealth(ApiTestCase):
    def test_health(self):
        body = self.client.get("/health").json()
        self.assertEqual(body["status"], "ok")


class TestCodebookRoutes(ApiTestCase):
    def test_generate(self):
        response = self.client.post(f"{PREFIX}/codebooks/generate", json={
            "sys": {"T": 3},
            "opt": {"criterion": "chordal", "max_iters": 5, "design_snr": 10.0},
            "size": 4,
        })
        data = self.assertEnvelope(response, 201)["data"]
        self.assertEqual(len(data["codebook"]["symbols"]), 4)
        self.assertLessEqual(data["summary"]["iterations"], 5)
        self.assertIn("chordal_final", data["summary"])

    def test_generate_single_line_rejected(self):
        response = self.client.post(f"{PREFIX}/codebooks/generate", json={"sys": {"T": 3}, "size": 1})
        body = self.assertEnvelope(response, 400, success=False)
        self.assertEqual(body["error"]["code"], "CONFIG_ERROR")

    def test_partition_inline_base(self):
        response = self.client.post(f"{PREFIX}/codebooks/partition", json={
            "sys": {"T": 3}, "base": self.base, "strategy": "greedy-swap",
        })
        data = self.assertEnvelope(response, 200)["data"]
        self.assertEqual(data["summary"]["sizes"], [2, 2])
        self.assertEqual(len(data["joint"]["user1"]["symbols"]), 2)

    def test_identifiability(self):
        response = self.client.post(f"{PREFIX}/codebooks/identifiability", json={"joint": self.joint})
        data = self.assertEnvelope(response, 200)["data"]
        self.assertTrue(data["identifiable"])
        self.assertEqual(data["pairs"], [])


class TestDesignRoutes(ApiTestCase):
    def test_design_from_inline_start(self):
        response = self.client.post(f"{PREFIX}/designs", json={
            "sys": {"T": 3, "N": 2},
            "opt": {"criterion": "dmin", "max_iters": 3, "design_snr": 10.0},
            "size": 2,
            "joint": self.joint,
        })
        data = self.assertEnvelope(response, 201)["data"]
        self.assertEqual(data["summary"]["sizes"], [2, 2])
        self.assertGreater(data["summary"]["d_min"], 0.0)

    def test_design_without_optimizer_config(self):
        response = self.client.post(f"{PREFIX}/designs", json={"sys": {"T": 3}, "size": 2})
        body = self.assertEnvelope(response, 422, success=False)
        self.assertEqual(body["error"]["code"], "CONFIG_ERROR")


class TestEvaluationRoutes(ApiTestCase):
    def test_evaluate(self):
        response = self.client.post(f"{PREFIX}/evaluations", json={
            "sys": {"T": 3, "N": 2}, "joint": self.joint, "snr_grid_db": [0.0, 10.0],
        })
        rows = self.assertEnvelope(response, 200)["data"]
        self.assertEqual([r["snr_db"] for r in rows], [0.0, 10.0])
        self.assertLess(rows[0]["d_min"], rows[1]["d_min"])

    def test_missing_joint(self):
        response = self.client.post(f"{PREFIX}/evaluations", json={"sys": {"T": 3}, "snr_grid_db": [0.0]})
        body = self.assertEnvelope(response, 422, success=False)
        self.assertIn("joint", [d["field"] for d in body["error"]["details"]])

    def test_invalid_block_length(self):
        response = self.client.post(f"{PREFIX}/evaluations", json={
            "sys": {"T": 1}, "joint": self.joint, "snr_grid_db": [0.0],
        })
        body = self.assertEnvelope(response, 422, success=False)
        self.assertIn("sys.T", [d["field"] for d in body["error"]["details"]])


class TestSimulationRoutes(ApiTestCase):
    def test_pilot_mmse(self):
        response = self.client.post(f"{PREFIX}/simulations", json={
            "sys": {"T": 4, "N": 2},
            "sim": {"snr_grid_db": [10.0], "num_blocks": 100, "scheme": "pilot-mmse", "bits": 2},
        })
        data = self.assertEnvelope(response, 200)["data"]
        self.assertEqual(data["scheme"], "pilot-mmse")
        self.assertEqual(data["points"][0]["blocks"], 100)

    def test_joint_ml(self):
        response = self.client.post(f"{PREFIX}/simulations", json={
            "sys": {"T": 3, "N": 2}, "joint": self.joint,
            "sim": {"snr_grid_db": [20.0], "num_blocks": 100, "seed": 3},
        })
        point = self.assertEnvelope(response, 200)["data"]["points"][0]
        self.assertGreaterEqual(point["joint_ser"], 0.0)
        self.assertLessEqual(point["joint_ser"], 1.0)


class TestRunRoutes(ApiTestCase):
    def test_list_and_get(self):
        self.client.post(f"{PREFIX}/evaluations", json={
            "sys": {"T": 3}, "joint": self.joint, "snr_grid_db": [5.0],
        })
        body = self.assertEnvelope(self.client.get(f"{PREFIX}/runs", params={"command": "evaluate"}), 200)
        self.assertGreaterEqual(body["meta"]["total"], 1)
        newest = body["data"][0]
        self.assertEqual(newest["command"], "evaluate")
        self.assertNotIn("joint", newest["spec"])

        run = self.assertEnvelope(self.client.get(f"{PREFIX}/runs/{newest['id']}"), 200)["data"]
        self.assertEqual(run["id"], newest["id"])

    def test_unknown_run(self):
        body = self.assertEnvelope(self.client.get(f"{PREFIX}/runs/999999999"), 404, success=False)
        self.assertEqual(body["error"]["code"], "NOT_FOUND")


if __name__ == "__main__":
    unittest.main()
