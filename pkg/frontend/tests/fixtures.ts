// Recorded wire traffic from a real server over the bundled fixture data.
// Captured once and checked in so component tests replay exact payloads
// without a server (or a live model) in the loop.

export const JUKPAI_SSE = "data: {\"session_id\": \"add6d880f7364ded88ce16cc59bcf600\", \"seq\": 0, \"kind\": \"thought\", \"payload\": {\"text\": \"I should look this up in the tables\"}, \"tokens\": 48}\n\ndata: {\"session_id\": \"add6d880f7364ded88ce16cc59bcf600\", \"seq\": 1, \"kind\": \"action\", \"payload\": {\"tool\": \"search_csv\", \"input\": \"How high is the accessible surface area of JUKPAI?\"}, \"tokens\": 0}\n\ndata: {\"session_id\": \"add6d880f7364ded88ce16cc59bcf600\", \"seq\": 2, \"kind\": \"observation\", \"payload\": {\"text\": \"|  | Accessible Surface Area (m^2/cm^3) |\\n| --- | --- |\\n| 4837 | 1474.22 |\", \"notes\": [\"[Table Searcher] Query: SELECT `Accessible Surface Area (m^2/cm^3)` FROM coremof WHERE `name` == 'JUKPAI'\"]}, \"tokens\": 19}\n\ndata: {\"session_id\": \"add6d880f7364ded88ce16cc59bcf600\", \"seq\": 3, \"kind\": \"final\", \"payload\": {\"thought\": \"I now know the final answer\", \"answer\": \"The Accessible Surface Area for JUKPAI is 1474.22.\"}, \"tokens\": 96}\n\n";

export const TOKEN_LIMIT_SSE = "data: {\"session_id\": \"12bba59f10624dd6bd8130e726d4c229\", \"seq\": 0, \"kind\": \"thought\", \"payload\": {\"text\": \"I should look this up in the tables\"}, \"tokens\": 39}\n\ndata: {\"session_id\": \"12bba59f10624dd6bd8130e726d4c229\", \"seq\": 1, \"kind\": \"action\", \"payload\": {\"tool\": \"search_csv\", \"input\": \"Show the Density of all materials\"}, \"tokens\": 0}\n\ndata: {\"session_id\": \"12bba59f10624dd6bd8130e726d4c229\", \"seq\": 2, \"kind\": \"error\", \"payload\": {\"label\": \"token_limit\", \"detail\": \"estimated 367 tokens exceeds budget 111\"}, \"tokens\": 0}\n\n";

export const GA_SUMMARY = {
  "run_id": "ga-fixture-7",
  "properties": [
    "hydrogen_uptake"
  ],
  "objectives": [
    {
      "kind": "near",
      "label": "near 38",
      "target": 38.0
    }
  ],
  "best": {
    "gene": "dia+N20+N102",
    "values": [
      37.9767
    ],
    "fitness": 0.0014026089730854983
  },
  "generations": [
    {
      "index": 0,
      "count": 16,
      "mean": [
        34.0730625
      ],
      "std": [
        3.7015974927725463
      ],
      "values": [
        [
          36.7198,
          35.8738,
          35.7226,
          35.3664,
          35.0534,
          28.0332,
          28.0324,
          27.9228,
          38.0316,
          37.5851,
          36.9669,
          36.7794,
          36.199,
          34.3415,
          34.0207,
          28.5204
        ]
      ],
      "elite_best_fitness": 0.0019022507961158814
    },
    {
      "index": 1,
      "count": 16,
      "mean": [
        35.366025
      ],
      "std": [
        3.6658276234251206
      ],
      "values": [
        [
          36.0624,
          35.9863,
          35.8086,
          35.3686,
          35.6414,
          37.6643,
          26.4316,
          26.0175,
          37.9163,
          37.2455,
          36.1175,
          35.9536,
          37.6547,
          37.2619,
          37.0658,
          37.6604
        ]
      ],
      "elite_best_fitness": 0.0019022507961158814
    },
    {
      "index": 2,
      "count": 10,
      "mean": [
        37.268899999999995
      ],
      "std": [
        0.984392642981222
      ],
      "values": [
        [
          37.6042,
          37.9173,
          35.4719,
          35.7196,
          37.9767,
          38.2102,
          38.2559,
          37.4011,
          37.2873,
          36.8448
        ]
      ],
      "elite_best_fitness": 0.0014026089730854983
    },
    {
      "index": 3,
      "count": 0,
      "mean": [
        null
      ],
      "std": [
        null
      ],
      "values": [
        []
      ],
      "elite_best_fitness": 0.0014026089730854983
    }
  ]
};
